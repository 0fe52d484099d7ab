//! Python bindings. Matrices cross the boundary as lists of rows.

use mcgc_core::error::Error;
use mcgc_core::model::{self, Checkpoint, ModelParams, PoolingConfig};
use mcgc_core::train::{self, OptimizerKind, TrainConfig};
use mcgc_core::tx::{self, EdgeWeighting, PatternOptions};
use mcgc_core::{graph, tu, Graph, GraphDataset};
use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, what: &str) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what} rows have differing lengths")));
    }
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

#[pyclass(name = "Graph", module = "mcgc", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(adjacency: Vec<Vec<f64>>, features: Vec<Vec<f64>>, label: usize) -> PyResult<Self> {
        let g = Graph::new(
            from_rows(adjacency, "adjacency")?,
            from_rows(features, "features")?,
            label,
        )
        .map_err(py_err)?;
        Ok(PyGraph { inner: g })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    #[getter]
    fn label(&self) -> usize {
        self.inner.label()
    }

    fn adjacency(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.adjacency())
    }

    fn features(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.features())
    }

    /// Same graph with old node `i` moved to position `perm[i]`.
    fn permuted(&self, perm: Vec<usize>) -> PyResult<PyGraph> {
        let g = graph::permute_nodes(&self.inner, &perm).map_err(py_err)?;
        Ok(PyGraph { inner: g })
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={}, label={})",
            self.inner.num_nodes(),
            self.inner.num_edges(),
            self.inner.label()
        )
    }
}

#[pyclass(name = "Dataset", module = "mcgc")]
struct PyDataset {
    inner: GraphDataset,
}

#[pymethods]
impl PyDataset {
    /// Reads a TU benchmark folder such as `data/MUTAG`.
    #[staticmethod]
    fn load_tu(dir: &str, name: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: tu::load_tu_dataset(dir, name).map_err(py_err)?,
        })
    }

    /// Reads a directory written by `mcgc ingest` or `mcgc synth`.
    #[staticmethod]
    fn read(dir: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: tx::read_dataset(dir).map_err(py_err)?,
        })
    }

    /// Synthetic transaction corpus turned into pattern graphs.
    #[staticmethod]
    #[pyo3(signature = (seed, phishing = 100, normal = 100, k_order = 4, edge_weights = "binary"))]
    fn synthetic(seed: u64, phishing: usize, normal: usize, k_order: usize, edge_weights: &str) -> PyResult<Self> {
        let corpus = tx::synth_tx_corpus(seed, phishing, normal).map_err(py_err)?;
        let opts = PatternOptions {
            k_order,
            edge_weights: edge_weights.parse::<EdgeWeighting>().map_err(py_err)?,
            ..PatternOptions::default()
        };
        let ds = tx::build_dataset("synthetic", &corpus.records, &corpus.targets, &opts).map_err(py_err)?;
        Ok(PyDataset { inner: ds })
    }

    #[staticmethod]
    fn from_graphs(name: &str, graphs: Vec<PyRef<'_, PyGraph>>, num_classes: usize) -> PyResult<Self> {
        let graphs = graphs.iter().map(|g| g.inner.clone()).collect();
        Ok(PyDataset {
            inner: GraphDataset::new(name, graphs, num_classes).map_err(py_err)?,
        })
    }

    fn write(&self, dir: &str) -> PyResult<()> {
        tx::write_dataset(dir, &self.inner).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes
    }

    #[getter]
    fn max_nodes(&self) -> usize {
        self.inner.max_nodes()
    }

    fn labels(&self) -> Vec<usize> {
        self.inner.labels()
    }

    fn graph(&self, i: usize) -> PyResult<PyGraph> {
        self.inner
            .graphs
            .get(i)
            .map(|g| PyGraph { inner: g.clone() })
            .ok_or_else(|| PyValueError::new_err(format!("graph index {i} out of range")))
    }

    /// `(graphs, classes, mean_nodes, mean_edges)`.
    fn stats(&self) -> PyResult<(usize, usize, f64, f64)> {
        let s = tu::dataset_stats(&self.inner).map_err(py_err)?;
        Ok((s.graphs, s.classes, s.mean_nodes, s.mean_edges))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "PoolingConfig", module = "mcgc", skip_from_py_object)]
#[derive(Clone)]
struct PyPoolingConfig {
    inner: PoolingConfig,
}

#[pymethods]
impl PyPoolingConfig {
    #[new]
    #[pyo3(signature = (layers, iterations, dim, clusters, entropy_coeff = 1.0))]
    fn new(layers: usize, iterations: usize, dim: usize, clusters: Vec<usize>, entropy_coeff: f64) -> PyResult<Self> {
        let mut cfg = PoolingConfig::new(layers, iterations, dim, clusters).map_err(py_err)?;
        cfg.entropy_coeff = entropy_coeff;
        cfg.validate().map_err(py_err)?;
        Ok(PyPoolingConfig { inner: cfg })
    }

    /// Default architecture for graphs of up to `max_nodes` nodes.
    #[staticmethod]
    #[pyo3(signature = (max_nodes, dim = 64))]
    fn for_max_nodes(max_nodes: usize, dim: usize) -> Self {
        PyPoolingConfig {
            inner: PoolingConfig::for_max_nodes(max_nodes, dim),
        }
    }

    #[getter]
    fn layers(&self) -> usize {
        self.inner.layers
    }

    #[getter]
    fn clusters(&self) -> Vec<usize> {
        self.inner.cluster_sizes.clone()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "Model", module = "mcgc")]
struct PyModel {
    config: PoolingConfig,
    params: ModelParams,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(config: PyRef<'_, PyPoolingConfig>, input_dim: usize, num_classes: usize, seed: u64) -> PyResult<Self> {
        let params = ModelParams::init(&config.inner, input_dim, num_classes, seed).map_err(py_err)?;
        Ok(PyModel {
            config: config.inner.clone(),
            params,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let ck = Checkpoint::load(path).map_err(py_err)?;
        let params = ck.model().map_err(py_err)?;
        Ok(PyModel {
            config: ck.config,
            params,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        Checkpoint::new(self.config.clone(), &self.params)
            .save(path)
            .map_err(py_err)
    }

    fn predict_proba(&self, g: PyRef<'_, PyGraph>) -> PyResult<Vec<f64>> {
        Ok(model::predict_proba(&g.inner, &self.params, &self.config)
            .map_err(py_err)?
            .to_vec())
    }

    fn predict(&self, g: PyRef<'_, PyGraph>) -> PyResult<usize> {
        model::predict(&g.inner, &self.params, &self.config).map_err(py_err)
    }

    fn loss(&self, g: PyRef<'_, PyGraph>) -> PyResult<f64> {
        model::graph_loss(&g.inner, &self.params, &self.config).map_err(py_err)
    }

    /// Parameter gradients of the loss, keyed by tensor name.
    fn gradients(&self, g: PyRef<'_, PyGraph>) -> PyResult<Vec<(String, Vec<Vec<f64>>)>> {
        let out = model::param_gradients(&g.inner, &self.params, &self.config).map_err(py_err)?;
        Ok(out
            .grads
            .iter()
            .map(|(name, t)| (name.to_string(), to_rows(t)))
            .collect())
    }

    fn parameter_names(&self) -> Vec<String> {
        self.params.store().names().to_vec()
    }

    fn accuracy(&self, ds: PyRef<'_, PyDataset>) -> PyResult<f64> {
        train::evaluate(&ds.inner.graphs, &self.params, &self.config).map_err(py_err)
    }
}

fn train_config(lr: f64, epochs: usize, folds: usize, seed: u64, optimizer: &str) -> PyResult<TrainConfig> {
    let cfg = TrainConfig {
        learning_rate: lr,
        epochs,
        folds,
        seed,
        optimizer: optimizer.parse::<OptimizerKind>().map_err(py_err)?,
        accumulation: 1,
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// Trains on the whole dataset. Returns the model and the metrics as JSON.
#[pyfunction]
#[pyo3(signature = (dataset, config, lr = 0.01, epochs = 100, seed = 0, optimizer = "adam"))]
fn fit(
    py: Python<'_>,
    dataset: PyRef<'_, PyDataset>,
    config: PyRef<'_, PyPoolingConfig>,
    lr: f64,
    epochs: usize,
    seed: u64,
    optimizer: &str,
) -> PyResult<(PyModel, String)> {
    let cfg = train_config(lr, epochs, 2, seed, optimizer)?;
    let ds = &dataset.inner;
    let pcfg = &config.inner;
    let (params, metrics) = py.detach(|| train::train(ds, &cfg, pcfg)).map_err(py_err)?;
    Ok((
        PyModel {
            config: pcfg.clone(),
            params,
        },
        metrics.to_json().map_err(py_err)?,
    ))
}

/// Stratified k-fold cross-validation. Returns `(mean accuracy, metrics JSON)`.
#[pyfunction]
#[pyo3(signature = (dataset, config, lr = 0.01, epochs = 100, folds = 10, seed = 0, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    dataset: PyRef<'_, PyDataset>,
    config: PyRef<'_, PyPoolingConfig>,
    lr: f64,
    epochs: usize,
    folds: usize,
    seed: u64,
    jobs: usize,
) -> PyResult<(f64, String)> {
    let cfg = train_config(lr, epochs, folds, seed, "adam")?;
    let ds = &dataset.inner;
    let pcfg = &config.inner;
    let metrics = py
        .detach(|| train::kfold_cv_jobs(ds, &cfg, pcfg, jobs.max(1)))
        .map_err(py_err)?;
    Ok((metrics.mean_accuracy.unwrap_or(0.0), metrics.to_json().map_err(py_err)?))
}

/// `(max relative error, passed)` over `graphs` random graphs.
#[pyfunction]
#[pyo3(signature = (seed = 0, graphs = 20))]
fn gradcheck(py: Python<'_>, seed: u64, graphs: usize) -> PyResult<(f64, bool)> {
    let report = py.detach(|| model::gradcheck_suite(seed, graphs)).map_err(py_err)?;
    Ok((report.max_rel_error, report.passed))
}

/// Runs the command-line interface and returns its exit code.
#[pyfunction]
fn main(argv: Vec<String>) -> i32 {
    mcgc_core::cli::dispatch(std::iter::once("mcgc".to_string()).chain(argv))
}

#[pymodule]
fn mcgc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyPoolingConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(main, m)?)?;
    Ok(())
}
