//! Graph classification with multi-channel hierarchical pooling, plus the
//! tooling to turn transaction logs and TU benchmark files into graph datasets.

pub mod cli;
pub mod error;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod train;
pub mod tu;
pub mod tx;

pub use error::{Error, Result};
pub use graph::{Graph, GraphDataset};
pub use model::{ModelParams, PoolingConfig};
pub use numerics::ParamStore;
