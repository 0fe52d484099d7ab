//! Dense primitives shared by the model: nonlinearities, row softmax,
//! entropy, a named parameter store and the central-difference gradient
//! oracle used to check every hand-written backward pass.

use std::collections::HashMap;

use ndarray::{Array1, Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| v.max(0.0))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

pub fn softmax(v: &Array1<f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = v.mapv(|x| (x - max).exp());
    let sum = e.sum();
    e / sum
}

/// `p ln p` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy (nats) of every row of a row-stochastic matrix.
pub fn row_entropy(m: &Array2<f64>) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(m.nrows());
    for (i, row) in m.rows().into_iter().enumerate() {
        if let Some(v) = row.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Validation(format!("row {i} has a negative or NaN entry {v}")));
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!("row {i} sums to {sum}, not 1")));
        }
        out[i] = -row.iter().map(|&p| xlogx(p)).sum::<f64>();
    }
    Ok(out)
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Ordered collection of named 2-D tensors.
///
/// Vectors are stored as single-row or single-column matrices so that every
/// optimizer and serializer only deals with one shape kind. Insertion order
/// is preserved and is part of the determinism contract: tensors drawn from
/// the same seed in the same order are bit-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamStore {
    rng_seed: u64,
    names: Vec<String>,
    tensors: Vec<Array2<f64>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    rng_state: Option<ChaCha8Rng>,
}

impl ParamStore {
    pub fn new(rng_seed: u64) -> Self {
        ParamStore {
            rng_seed,
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
            rng_state: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Array2<f64>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Validation(format!("duplicate parameter `{name}`")));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(())
    }

    /// Draws a `rows x cols` tensor uniformly from `[-s, s]` with the Glorot
    /// bound, continuing the store's seeded stream.
    pub fn insert_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<()> {
        let bound = glorot_bound(rows, cols);
        let seed = self.rng_seed;
        let rng = self.rng_state.get_or_insert_with(|| ChaCha8Rng::seed_from_u64(seed));
        let t = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound));
        self.insert(name, t)
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<()> {
        self.insert(name, Array2::zeros((rows, cols)))
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamStore {
        let mut out = ParamStore::new(self.rng_seed);
        for (name, t) in self.iter() {
            out.insert(name, Array2::zeros(t.dim()))
                .expect("names are unique in the source store");
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub(crate) fn expect(&self, name: &str) -> &Array2<f64> {
        self.get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` missing from store"))
    }

    pub(crate) fn expect_mut(&mut self, name: &str) -> &mut Array2<f64> {
        self.get_mut(name)
            .unwrap_or_else(|| panic!("parameter `{name}` missing from store"))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Array2::len).sum()
    }

    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.names == other.names && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.dim() == b.dim())
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ParamStore, alpha: f64) {
        assert!(self.same_layout(other), "parameter layouts differ");
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            Zip::from(a).and(b).for_each(|x, &y| *x += alpha * y);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in &mut self.tensors {
            t.mapv_inplace(|v| v * alpha);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn tensors(&self) -> &[Array2<f64>] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.tensors
    }

    /// Rebuilds the name index after deserialization.
    pub(crate) fn reindex(&mut self) -> Result<()> {
        self.index.clear();
        if self.names.len() != self.tensors.len() {
            return Err(Error::Validation("parameter name/tensor count mismatch".into()));
        }
        for (i, name) in self.names.iter().enumerate() {
            if self.index.insert(name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate parameter `{name}`")));
            }
        }
        Ok(())
    }
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.rng_seed == other.rng_seed && self.names == other.names && self.tensors == other.tensors
    }
}

/// Central-difference gradient of `f` at `params`, one coordinate at a time.
pub fn finite_diff_grad<F>(f: F, params: &ParamStore, eps: f64) -> Result<ParamStore>
where
    F: Fn(&ParamStore) -> f64,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Validation(format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    let mut probe = params.clone();
    let mut grad = params.zeros_like();
    for t in 0..params.len() {
        let name = params.names[t].clone();
        for k in 0..params.tensors[t].len() {
            let orig = get_flat(&params.tensors[t], k);
            set_flat(&mut probe.tensors[t], k, orig + eps);
            let up = f(&probe);
            set_flat(&mut probe.tensors[t], k, orig - eps);
            let down = f(&probe);
            set_flat(&mut probe.tensors[t], k, orig);
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::Numerical {
                    location: format!("finite difference of parameter `{name}` entry {k}"),
                });
            }
            set_flat(&mut grad.tensors[t], k, (up - down) / (2.0 * eps));
        }
    }
    Ok(grad)
}

fn get_flat(t: &Array2<f64>, k: usize) -> f64 {
    let cols = t.ncols();
    t[[k / cols, k % cols]]
}

fn set_flat(t: &mut Array2<f64>, k: usize, v: f64) {
    let cols = t.ncols();
    t[[k / cols, k % cols]] = v;
}

/// Elementwise relative error `|a - b| / max(|a|, |b|, floor)`, maximised
/// over every entry of every tensor. Returns the error and the name of the
/// tensor where it occurs.
pub fn max_relative_error(a: &ParamStore, b: &ParamStore, floor: f64) -> (f64, String) {
    assert!(a.same_layout(b), "gradient layouts differ");
    let mut worst = (0.0, String::new());
    for ((name, x), (_, y)) in a.iter().zip(b.iter()) {
        for (&u, &v) in x.iter().zip(y.iter()) {
            let err = (u - v).abs() / u.abs().max(v.abs()).max(floor);
            if err > worst.0 || err.is_nan() {
                worst = (err, name.to_string());
            }
        }
    }
    worst
}
