//! The multi-channel pooling classifier.

mod backward;
mod checkpoint;
mod config;
mod forward;
mod gradcheck;
pub mod layers;
mod params;

pub use backward::{param_gradients, Gradients};
pub use checkpoint::Checkpoint;
pub use config::{
    cluster_schedule, PoolingConfig, DEFAULT_ENTROPY_COEFF, DEFAULT_EPSILON, DEFAULT_HIDDEN_DIM, DEFAULT_ITERATIONS,
    DEFAULT_LAYERS, POOL_RATIO,
};
pub use forward::{forward, graph_loss, mcgc_loss, predict, predict_proba, ChannelState, LayerState};
pub use gradcheck::{
    check_gradients, gradcheck_suite, random_graph, GradCheckCase, GradCheckReport, GRADCHECK_EPS, GRADCHECK_FLOOR,
    GRADCHECK_TOLERANCE,
};
pub use layers::{
    assignment_matrix, classify, coarsen, gcn_layer, global_readout, gnn_block, importance_readout, normalize_block,
    normalized_adjacency,
};
pub use params::{
    conv_name, expected_shapes, importance_name, pool_name, ModelParams, CLASSIFIER_BIAS, CLASSIFIER_WEIGHT,
};

pub(crate) use forward::argmax;
