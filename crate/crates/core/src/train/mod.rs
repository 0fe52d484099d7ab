//! Optimization loop, cross-validation and reporting.

mod cv;
mod metrics;
mod optim;

pub use cv::{evaluate, kfold_cv, kfold_cv_jobs, stratified_folds, train};
pub use metrics::{evaluate_accuracy, EpochRecord, FoldRecord, Metrics};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub folds: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Graphs whose gradients are averaged into one update.
    pub accumulation: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            folds: DEFAULT_FOLDS,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            accumulation: 1,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted: it freezes the parameters, which is
    /// useful as a baseline.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Validation(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.accumulation == 0 {
            return Err(Error::Validation("accumulation must be >= 1".into()));
        }
        Ok(())
    }
}
