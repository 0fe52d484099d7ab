use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, PoolingConfig};
use crate::error::Result;
use crate::numerics::ParamStore;
use crate::tx::{read_json, write_json};

/// A trained model on disk: architecture plus every named tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: PoolingConfig,
    pub input_dim: usize,
    pub num_classes: usize,
    params: ParamStore,
}

impl Checkpoint {
    pub fn new(config: PoolingConfig, params: &ModelParams) -> Self {
        Checkpoint {
            config,
            input_dim: params.input_dim(),
            num_classes: params.num_classes(),
            params: params.store().clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut ck: Checkpoint = read_json(path.as_ref())?;
        ck.params.reindex()?;
        ck.config.validate()?;
        Ok(ck)
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::from_store(&self.config, self.params.clone(), self.input_dim, self.num_classes)
    }
}
