//! Analytic versus central-difference gradients on random graphs.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::backward::param_gradients;
use super::forward::graph_loss;
use super::{cluster_schedule, ModelParams, PoolingConfig};
use crate::error::Result;
use crate::graph::Graph;
use crate::numerics::{finite_diff_grad, max_relative_error};

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Magnitude below which gradient entries are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Random connected-ish graph with `n` nodes, uniform features in `[0, 1)`.
pub fn random_graph(rng: &mut impl Rng, n: usize, feature_dim: usize, num_classes: usize) -> Result<Graph> {
    let mut a = Array2::zeros((n, n));
    for i in 1..n {
        // Spanning path plus random chords.
        let j = rng.random_range(0..i);
        a[[i, j]] = 1.0;
        a[[j, i]] = 1.0;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(0.25) {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    let x = Array2::from_shape_fn((n, feature_dim), |_| rng.random_range(0.0..1.0));
    Graph::new(a, x, rng.random_range(0..num_classes))
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckCase {
    pub nodes: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub cases: Vec<GradCheckCase>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Maximum relative disagreement between the analytic and numerical gradient
/// of the loss for one graph.
pub fn check_gradients(g: &Graph, params: &ModelParams, cfg: &PoolingConfig, eps: f64) -> Result<(f64, String)> {
    let analytic = param_gradients(g, params, cfg)?.grads;
    let input_dim = params.input_dim();
    let classes = params.num_classes();
    let numeric = finite_diff_grad(
        |store| {
            ModelParams::from_store(cfg, store.clone(), input_dim, classes)
                .and_then(|p| graph_loss(g, &p, cfg))
                .unwrap_or(f64::NAN)
        },
        params.store(),
        eps,
    )?;
    Ok(max_relative_error(&analytic, &numeric, GRADCHECK_FLOOR))
}

/// `count` random graphs with `N` in `[4, 12]`, `d = 4`, `L = 2`, two
/// classes, each with freshly initialized parameters.
pub fn gradcheck_suite(seed: u64, count: usize) -> Result<GradCheckReport> {
    const FEATURES: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(count);
    for _ in 0..count {
        let n = rng.random_range(4..=12);
        let g = random_graph(&mut rng, n, FEATURES, 2)?;
        let cfg = PoolingConfig::new(2, 3, 4, cluster_schedule(12, 2))?;
        let params = ModelParams::init(&cfg, FEATURES, 2, rng.random())?;
        let (err, name) = check_gradients(&g, &params, &cfg, GRADCHECK_EPS)?;
        cases.push(GradCheckCase {
            nodes: n,
            max_rel_error: err,
            worst_param: name,
        });
    }
    let max_rel_error = cases
        .iter()
        .map(|c| c.max_rel_error)
        .fold(0.0, |a, b| if b.is_nan() || b > a { b } else { a });
    Ok(GradCheckReport {
        seed,
        passed: max_rel_error < GRADCHECK_TOLERANCE,
        max_rel_error,
        cases,
    })
}
