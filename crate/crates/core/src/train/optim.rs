use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ParamStore;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Validation(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// First-order optimizer state over a [`ParamStore`].
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: u64,
        m: ParamStore,
        v: ParamStore,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ParamStore) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Validation(format!("learning rate {lr} must be finite and >= 0")));
        }
        Ok(match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                step: 0,
                m: params.zeros_like(),
                v: params.zeros_like(),
            },
        })
    }

    pub fn lr(&self) -> f64 {
        match self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => *lr,
        }
    }

    /// Applies one update in place. A zero learning rate leaves `params`
    /// bit-identical.
    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) -> Result<()> {
        if !params.same_layout(grads) {
            return Err(Error::dim("optimizer step", "gradient layout differs from parameters"));
        }
        match self {
            Optimizer::Sgd { lr } => {
                if *lr != 0.0 {
                    params.add_scaled(grads, -*lr);
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let t = *step as i32;
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                let lr = *lr;
                let tensors = params
                    .tensors_mut()
                    .iter_mut()
                    .zip(grads.tensors())
                    .zip(m.tensors_mut().iter_mut().zip(v.tensors_mut().iter_mut()));
                for ((p, g), (mt, vt)) in tensors {
                    ndarray::Zip::from(p).and(g).and(mt).and(vt).for_each(|p, &g, m, v| {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        // Moments of parameters that stop receiving gradient
                        // decay geometrically; subnormals would slow every
                        // later step without moving the parameter.
                        if m.abs() < f64::MIN_POSITIVE {
                            *m = 0.0;
                        }
                        if *v < f64::MIN_POSITIVE {
                            *v = 0.0;
                        }
                        if lr != 0.0 {
                            let m_hat = *m / bc1;
                            let v_hat = *v / bc2;
                            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                        }
                    });
                }
            }
        }
        Ok(())
    }
}
