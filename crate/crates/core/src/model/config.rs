use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_ITERATIONS: usize = 3;
pub const DEFAULT_HIDDEN_DIM: usize = 64;
pub const DEFAULT_ENTROPY_COEFF: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Fraction of nodes kept by each pooling step in the default schedule.
pub const POOL_RATIO: f64 = 0.25;

/// Architecture of the multi-channel pooling network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingConfig {
    /// Number of pooling layers `L`; the network has `L + 1` channels.
    pub layers: usize,
    /// Propagation steps `K` inside every GNN block.
    pub iterations: usize,
    pub hidden_dim: usize,
    /// `[n_1, ..., n_L]`: cluster count produced by each pooling layer.
    pub cluster_sizes: Vec<usize>,
    pub entropy_coeff: f64,
    /// Floor for probabilities inside logarithms and for readout
    /// normalization denominators.
    pub epsilon: f64,
}

impl PoolingConfig {
    pub fn new(layers: usize, iterations: usize, hidden_dim: usize, cluster_sizes: Vec<usize>) -> Result<Self> {
        let cfg = PoolingConfig {
            layers,
            iterations,
            hidden_dim,
            cluster_sizes,
            entropy_coeff: DEFAULT_ENTROPY_COEFF,
            epsilon: DEFAULT_EPSILON,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default architecture sized for graphs of at most `max_nodes` nodes.
    pub fn for_max_nodes(max_nodes: usize, hidden_dim: usize) -> Self {
        PoolingConfig {
            layers: DEFAULT_LAYERS,
            iterations: DEFAULT_ITERATIONS,
            hidden_dim,
            cluster_sizes: cluster_schedule(max_nodes, DEFAULT_LAYERS),
            entropy_coeff: DEFAULT_ENTROPY_COEFF,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_layers(mut self, layers: usize, max_nodes: usize) -> Self {
        self.layers = layers;
        self.cluster_sizes = cluster_schedule(max_nodes, layers);
        self
    }

    pub fn with_entropy_coeff(mut self, coeff: f64) -> Self {
        self.entropy_coeff = coeff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.layers == 0 {
            return fail("at least one pooling layer is required".into());
        }
        if self.iterations == 0 {
            return fail("GNN blocks need at least one propagation step".into());
        }
        if self.hidden_dim == 0 {
            return fail("hidden dimension must be positive".into());
        }
        if self.cluster_sizes.len() != self.layers {
            return fail(format!(
                "{} cluster sizes for {} pooling layers",
                self.cluster_sizes.len(),
                self.layers
            ));
        }
        if self.cluster_sizes.windows(2).any(|w| w[1] > w[0]) {
            return fail(format!("cluster sizes {:?} must be nonincreasing", self.cluster_sizes));
        }
        if self.cluster_sizes.last().is_some_and(|&n| n < 2) {
            return fail("the last pooling layer needs at least 2 clusters".into());
        }
        if !(self.entropy_coeff >= 0.0 && self.entropy_coeff.is_finite()) {
            return fail(format!("entropy coefficient {} must be >= 0", self.entropy_coeff));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1e-3) {
            return fail(format!("epsilon {} outside (0, 1e-3)", self.epsilon));
        }
        Ok(())
    }
}

/// `n_{l+1} = max(2, ceil(ratio * n_l))` starting from `n_0 = max_nodes`.
pub fn cluster_schedule(max_nodes: usize, layers: usize) -> Vec<usize> {
    let mut n = max_nodes;
    (0..layers)
        .map(|_| {
            n = ((POOL_RATIO * n as f64).ceil() as usize).max(2);
            n
        })
        .collect()
}
