use ndarray::Array2;

use super::PoolingConfig;
use crate::error::{Error, Result};
use crate::numerics::ParamStore;

pub fn conv_name(layer: usize, step: usize) -> String {
    format!("conv.{layer}.{step}")
}

pub fn pool_name(layer: usize, step: usize) -> String {
    format!("pool.{layer}.{step}")
}

pub fn importance_name(layer: usize) -> String {
    format!("importance.{layer}")
}

pub const CLASSIFIER_WEIGHT: &str = "classifier.weight";
pub const CLASSIFIER_BIAS: &str = "classifier.bias";

/// Every trainable tensor of the network, addressed by name.
///
/// | name | shape |
/// |------|-------|
/// | `conv.l.k` | `in x d` (`in` = input width for `l = k = 0`, else `d`) |
/// | `pool.l.k` | `in x d`, last step `d x n_{l+1}` |
/// | `importance.l` | `d x 1` |
/// | `classifier.weight` | `(L+1)d x |Y|` |
/// | `classifier.bias` | `1 x |Y|` |
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    store: ParamStore,
    input_dim: usize,
    num_classes: usize,
}

impl ModelParams {
    /// Glorot-uniform weights drawn in a fixed order from `seed`; biases zero.
    pub fn init(cfg: &PoolingConfig, input_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 || num_classes < 2 {
            return Err(Error::Validation(format!(
                "need input_dim >= 1 and >= 2 classes, got {input_dim} and {num_classes}"
            )));
        }
        let mut store = ParamStore::new(seed);
        for (name, (r, c)) in expected_shapes(cfg, input_dim, num_classes) {
            if name == CLASSIFIER_BIAS {
                store.insert_zeros(name, r, c)?;
            } else {
                store.insert_glorot(name, r, c)?;
            }
        }
        Ok(ModelParams {
            store,
            input_dim,
            num_classes,
        })
    }

    /// Wraps an existing store after checking it matches the architecture.
    pub fn from_store(cfg: &PoolingConfig, store: ParamStore, input_dim: usize, num_classes: usize) -> Result<Self> {
        let expected = expected_shapes(cfg, input_dim, num_classes);
        if store.len() != expected.len() {
            return Err(Error::Validation(format!(
                "expected {} tensors, found {}",
                expected.len(),
                store.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(store.iter()) {
            if name != got_name || t.dim() != *shape {
                return Err(Error::Validation(format!(
                    "tensor `{got_name}` {:?} does not match expected `{name}` {shape:?}",
                    t.dim()
                )));
            }
        }
        if !store.all_finite() {
            return Err(Error::Validation("non-finite parameter".into()));
        }
        Ok(ModelParams {
            store,
            input_dim,
            num_classes,
        })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn into_store(self) -> ParamStore {
        self.store
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn conv(&self, layer: usize, step: usize) -> &Array2<f64> {
        self.store.expect(&conv_name(layer, step))
    }

    pub fn pool(&self, layer: usize, step: usize) -> &Array2<f64> {
        self.store.expect(&pool_name(layer, step))
    }

    pub fn conv_stack(&self, layer: usize, iterations: usize) -> Vec<&Array2<f64>> {
        (0..iterations).map(|k| self.conv(layer, k)).collect()
    }

    pub fn pool_stack(&self, layer: usize, iterations: usize) -> Vec<&Array2<f64>> {
        (0..iterations).map(|k| self.pool(layer, k)).collect()
    }

    pub fn importance(&self, layer: usize) -> &Array2<f64> {
        self.store.expect(&importance_name(layer))
    }

    pub fn classifier_weight(&self) -> &Array2<f64> {
        self.store.expect(CLASSIFIER_WEIGHT)
    }

    pub fn classifier_bias(&self) -> &Array2<f64> {
        self.store.expect(CLASSIFIER_BIAS)
    }
}

/// Names and shapes in initialization order.
pub fn expected_shapes(cfg: &PoolingConfig, input_dim: usize, num_classes: usize) -> Vec<(String, (usize, usize))> {
    let d = cfg.hidden_dim;
    let k = cfg.iterations;
    let mut out = Vec::new();
    for l in 0..=cfg.layers {
        let in_dim = if l == 0 { input_dim } else { d };
        for step in 0..k {
            let rows = if step == 0 { in_dim } else { d };
            out.push((conv_name(l, step), (rows, d)));
        }
        if l < cfg.layers {
            for step in 0..k {
                let rows = if step == 0 { in_dim } else { d };
                let cols = if step + 1 == k { cfg.cluster_sizes[l] } else { d };
                out.push((pool_name(l, step), (rows, cols)));
            }
        }
        out.push((importance_name(l), (d, 1)));
    }
    out.push((CLASSIFIER_WEIGHT.to_string(), ((cfg.layers + 1) * d, num_classes)));
    out.push((CLASSIFIER_BIAS.to_string(), (1, num_classes)));
    out
}
