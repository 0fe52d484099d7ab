//! Transaction ingestion: raw records to labelled pattern-graph datasets.

mod merge;
mod pattern;
mod record;
mod store;
mod synth;

pub use merge::{merge_multi_edges, MergedEdge, MergedEdges};
pub use pattern::{
    build_node_features, build_pattern_graph, EdgeWeighting, PatternOptions, TxNetwork, DEFAULT_K_ORDER,
    DEFAULT_MAX_NODES, NODE_FEATURE_DIM,
};
pub use record::{
    parse_targets_csv, parse_tx_csv, write_targets_csv, write_tx_csv, LabeledTarget, ParsedTransactions, RowError,
    TxRecord,
};
pub use store::{read_dataset, write_dataset, DatasetManifest, MANIFEST_FILE};
pub use synth::{synth_tx_corpus, SynthCorpus, NORMAL, PHISHING};

pub(crate) use store::{read_json, write_json};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::GraphDataset;

/// Builds one pattern graph per target, labelled from the target list.
///
/// Graphs come out in target order regardless of how extraction is
/// scheduled across threads.
pub fn build_dataset(
    name: &str,
    records: &[TxRecord],
    targets: &[LabeledTarget],
    opts: &PatternOptions,
) -> Result<GraphDataset> {
    if targets.is_empty() {
        return Err(Error::Validation("no targets given".into()));
    }
    let edges = merge_multi_edges(records);
    let net = TxNetwork::new(&edges);
    let graphs = targets
        .par_iter()
        .map(|t| Ok(net.pattern_graph(&t.address, opts)?.with_label(t.label)))
        .collect::<Result<Vec<_>>>()?;
    let num_classes = targets.iter().map(|t| t.label).max().unwrap_or(0) + 1;
    GraphDataset::new(name, graphs, num_classes.max(2))
}
