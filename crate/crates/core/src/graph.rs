//! Dense graph representation and adjacency preprocessing.
//!
//! Graphs here are small (tens to a few hundred nodes), so adjacency is kept
//! as a dense symmetric matrix. Self-loops are never stored; they are added
//! on the fly by [`add_self_loops`] right before normalization.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One classification instance: weighted undirected adjacency, node
/// features and a class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    adjacency: Array2<f64>,
    features: Array2<f64>,
    label: usize,
    node_ids: Option<Vec<String>>,
    target_index: Option<usize>,
}

impl Graph {
    pub fn new(adjacency: Array2<f64>, features: Array2<f64>, label: usize) -> Result<Self> {
        let g = Graph {
            adjacency,
            features,
            label,
            node_ids: None,
            target_index: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_node_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.num_nodes() {
            return Err(Error::Validation(format!(
                "{} node ids for a graph of {} nodes",
                ids.len(),
                self.num_nodes()
            )));
        }
        self.node_ids = Some(ids);
        Ok(self)
    }

    pub fn with_target(mut self, target: usize) -> Result<Self> {
        if target >= self.num_nodes() {
            return Err(Error::Validation(format!(
                "target index {target} out of range for {} nodes",
                self.num_nodes()
            )));
        }
        self.target_index = Some(target);
        Ok(self)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }

    /// Replaces the feature matrix; row count must still equal the node count.
    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes() {
            return Err(Error::dim(
                "Graph::with_features",
                format!("{} feature rows for {} nodes", features.nrows(), self.num_nodes()),
            ));
        }
        self.features = features;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.adjacency.dim();
        if r != c {
            return Err(Error::dim("Graph", format!("adjacency is {r}x{c}")));
        }
        if r == 0 {
            return Err(Error::Validation("graph has no nodes".into()));
        }
        if self.features.nrows() != r {
            return Err(Error::dim(
                "Graph",
                format!("{} feature rows for {r} nodes", self.features.nrows()),
            ));
        }
        for i in 0..r {
            if self.adjacency[[i, i]] != 0.0 {
                return Err(Error::Validation(format!("self-loop stored at node {i}")));
            }
            for j in 0..r {
                let a = self.adjacency[[i, j]];
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(Error::Validation(format!("adjacency[{i}][{j}] = {a}")));
                }
                if a != self.adjacency[[j, i]] {
                    return Err(Error::Validation(format!("adjacency not symmetric at ({i}, {j})")));
                }
            }
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite node feature".into()));
        }
        if let Some(ids) = &self.node_ids {
            if ids.len() != r {
                return Err(Error::Validation("node id count mismatch".into()));
            }
        }
        if let Some(t) = self.target_index {
            if t >= r {
                return Err(Error::Validation(format!("target index {t} out of range")));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn node_ids(&self) -> Option<&[String]> {
        self.node_ids.as_deref()
    }

    pub fn target_index(&self) -> Option<usize> {
        self.target_index
    }

    /// Number of undirected edges (nonzero entries above the diagonal).
    pub fn num_edges(&self) -> usize {
        let n = self.num_nodes();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.adjacency[[i, j]] != 0.0).count())
            .sum()
    }
}

/// Named collection of labelled graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
}

impl GraphDataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, num_classes: usize) -> Result<Self> {
        let ds = GraphDataset {
            name: name.into(),
            graphs,
            num_classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Validation(format!(
                "dataset needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        for (i, g) in self.graphs.iter().enumerate() {
            if g.label() >= self.num_classes {
                return Err(Error::Validation(format!(
                    "graph {i} has label {} but the dataset has {} classes",
                    g.label(),
                    self.num_classes
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::label).collect()
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::num_nodes).max().unwrap_or(0)
    }

    /// Common feature width, or an error if graphs disagree.
    pub fn feature_dim(&self) -> Result<usize> {
        let mut dims = self.graphs.iter().map(Graph::feature_dim);
        let first = dims.next().ok_or_else(|| Error::Validation("empty dataset".into()))?;
        if dims.any(|d| d != first) {
            return Err(Error::Validation("graphs have differing feature widths".into()));
        }
        Ok(first)
    }

    pub fn subset(&self, indices: &[usize]) -> GraphDataset {
        GraphDataset {
            name: self.name.clone(),
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            num_classes: self.num_classes,
        }
    }
}

fn check_square(op: &'static str, m: ArrayView2<f64>) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::dim(op, format!("expected a square matrix, got {r}x{c}")));
    }
    Ok(r)
}

/// `A + I`.
pub fn add_self_loops(adjacency: &Array2<f64>) -> Result<Array2<f64>> {
    let n = check_square("add_self_loops", adjacency.view())?;
    let mut out = adjacency.clone();
    for i in 0..n {
        out[[i, i]] += 1.0;
    }
    Ok(out)
}

/// Symmetric degree normalization `D^-1/2 A D^-1/2`, with `D` the row sums.
pub fn sym_normalize(adjacency: &Array2<f64>) -> Result<Array2<f64>> {
    let n = check_square("sym_normalize", adjacency.view())?;
    let inv_sqrt = inv_sqrt_degrees(adjacency)?;
    let mut out = adjacency.clone();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(out)
}

pub(crate) fn inv_sqrt_degrees(adjacency: &Array2<f64>) -> Result<Vec<f64>> {
    adjacency
        .rows()
        .into_iter()
        .enumerate()
        .map(|(row, r)| {
            let sum = r.sum();
            if sum > 0.0 && sum.is_finite() {
                Ok(1.0 / sum.sqrt())
            } else {
                Err(Error::DegenerateDegree { row, sum })
            }
        })
        .collect()
}

/// Relabels nodes so that old node `i` becomes node `perm[i]`.
pub fn permute_nodes(g: &Graph, perm: &[usize]) -> Result<Graph> {
    let n = g.num_nodes();
    check_permutation(perm, n)?;
    let mut adjacency = Array2::zeros((n, n));
    let mut features = Array2::zeros(g.features.dim());
    for i in 0..n {
        for j in 0..n {
            adjacency[[perm[i], perm[j]]] = g.adjacency[[i, j]];
        }
        features.row_mut(perm[i]).assign(&g.features.row(i));
    }
    let node_ids = g.node_ids.as_ref().map(|ids| {
        let mut out = vec![String::new(); n];
        for (i, id) in ids.iter().enumerate() {
            out[perm[i]] = id.clone();
        }
        out
    });
    Ok(Graph {
        adjacency,
        features,
        label: g.label,
        node_ids,
        target_index: g.target_index.map(|t| perm[t]),
    })
}

pub fn invert_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm, perm.len())?;
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    Ok(inv)
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Validation(format!(
            "permutation has length {} but the graph has {n} nodes",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Validation(format!(
                "not a permutation of 0..{n}: entry {p} repeated or out of range"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let v: f64 = rng.random_range(0.0..2.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        a
    }

    #[test]
    fn self_loops_small_cases() {
        assert_eq!(add_self_loops(&array![[0.0]]).unwrap(), array![[1.0]]);
        assert_eq!(
            add_self_loops(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap(),
            array![[1.0, 1.0], [1.0, 1.0]]
        );
    }

    #[test]
    fn self_loops_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(&mut rng, 5);
        let before = a.clone();
        let out = add_self_loops(&a).unwrap();
        assert_eq!(a, before);
        for i in 0..5 {
            for j in 0..5 {
                let expect = a[[i, j]] + if i == j { 1.0 } else { 0.0 };
                assert_eq!(out[[i, j]], expect);
            }
        }
    }

    #[test]
    fn self_loops_rejects_non_square() {
        let err = add_self_loops(&Array2::zeros((2, 3))).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn normalize_identity_and_pair() {
        let eye = Array2::<f64>::eye(4);
        assert_eq!(sym_normalize(&eye).unwrap(), eye);
        let out = sym_normalize(&array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        for v in out.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_matches_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = add_self_loops(&random_symmetric(&mut rng, 6)).unwrap();
        let out = sym_normalize(&a).unwrap();
        let mut d = Array2::<f64>::zeros((6, 6));
        for i in 0..6 {
            d[[i, i]] = 1.0 / a.row(i).sum().sqrt();
        }
        let oracle = d.dot(&a).dot(&d);
        for i in 0..6 {
            for j in 0..6 {
                assert!((out[[i, j]] - oracle[[i, j]]).abs() < 1e-12);
                assert!((out[[i, j]] - out[[j, i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_ring_is_uniform() {
        // 2-regular ring: every entry of the normalized matrix is A~[i][j] / 3.
        let n = 7;
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            a[[i, (i + 1) % n]] = 1.0;
            a[[(i + 1) % n, i]] = 1.0;
        }
        let looped = add_self_loops(&a).unwrap();
        let out = sym_normalize(&looped).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((out[[i, j]] - looped[[i, j]] / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalize_zero_row_is_an_error() {
        let err = sym_normalize(&array![[1.0, 0.0], [0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateDegree { row: 1, .. }));
    }

    #[test]
    fn permutation_identity_and_swap() {
        let g = Graph::new(array![[0.0, 1.0], [1.0, 0.0]], array![[1.0], [2.0]], 1).unwrap();
        assert_eq!(permute_nodes(&g, &[0, 1]).unwrap(), g);
        let swapped = permute_nodes(&g, &[1, 0]).unwrap();
        assert_eq!(swapped.adjacency(), g.adjacency());
        assert_eq!(swapped.features(), &array![[2.0], [1.0]]);
        assert_eq!(swapped.label(), 1);
    }

    #[test]
    fn permutation_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(1..10);
            let a = random_symmetric(&mut rng, n);
            let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
            let ids = (0..n).map(|i| format!("n{i}")).collect();
            let g = Graph::new(a, x, 0)
                .unwrap()
                .with_node_ids(ids)
                .unwrap()
                .with_target(n - 1)
                .unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let there = permute_nodes(&g, &perm).unwrap();
            there.validate().unwrap();
            let back = permute_nodes(&there, &invert_permutation(&perm).unwrap()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn permutation_must_be_bijection() {
        let g = Graph::new(Array2::zeros((3, 3)), Array2::zeros((3, 1)), 0).unwrap();
        assert!(matches!(permute_nodes(&g, &[0, 0, 1]), Err(Error::Validation(_))));
        assert!(permute_nodes(&g, &[0, 1]).is_err());
        assert!(permute_nodes(&g, &[0, 1, 3]).is_err());
    }

    #[test]
    fn graph_invariants_enforced() {
        assert!(Graph::new(array![[0.0, 1.0], [0.0, 0.0]], Array2::zeros((2, 1)), 0).is_err());
        assert!(Graph::new(array![[1.0]], Array2::zeros((1, 1)), 0).is_err());
        assert!(Graph::new(array![[0.0, -1.0], [-1.0, 0.0]], Array2::zeros((2, 1)), 0).is_err());
        assert!(Graph::new(Array2::zeros((2, 2)), Array2::zeros((3, 1)), 0).is_err());
        assert!(Graph::new(Array2::zeros((0, 0)), Array2::zeros((0, 1)), 0).is_err());
    }

    #[test]
    fn dataset_label_bounds() {
        let g = Graph::new(array![[0.0]], array![[1.0]], 2).unwrap();
        assert!(GraphDataset::new("x", vec![g.clone()], 2).is_err());
        assert!(GraphDataset::new("x", vec![g.clone()], 3).is_ok());
        assert!(GraphDataset::new("x", vec![], 1).is_err());
    }

    #[test]
    fn normalized_entries_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..8 {
            let a = random_symmetric(&mut rng, n).mapv(|v| if v > 1.0 { 1.0 } else { 0.0 });
            let out = sym_normalize(&add_self_loops(&a).unwrap()).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((0.0..=1.0).contains(&out[[i, j]]));
                    assert_eq!(out[[i, j]], out[[j, i]]);
                }
            }
        }
    }
}
