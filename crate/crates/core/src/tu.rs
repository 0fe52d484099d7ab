//! Loader for the TU Dortmund graph-classification text format.
//!
//! A dataset `DS` lives in one directory as
//! `DS_A.txt` (1-based `i, j` edge lines), `DS_graph_indicator.txt`
//! (graph id per node), `DS_graph_labels.txt` and optionally
//! `DS_node_labels.txt`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};

/// Degrees above this share the last one-hot slot in the fallback features.
pub const DEGREE_CAP: usize = 30;

/// Published summary statistics for the benchmark sets:
/// (name, graphs, classes, mean nodes, mean edges).
pub const REFERENCE_STATS: &[(&str, usize, usize, f64, f64)] = &[
    ("MUTAG", 188, 2, 17.92, 20.42),
    ("PTC", 344, 2, 14.29, 14.69),
    ("PROTEINS", 1113, 2, 39.06, 72.82),
    ("NCI1", 4110, 2, 29.87, 32.30),
    ("NCI109", 4127, 2, 29.69, 32.13),
    ("IMDB-BINARY", 1000, 2, 19.77, 96.53),
    ("REDDIT-BINARY", 2000, 2, 429.63, 497.75),
    ("Ethereum", 2518, 2, 120.43, 130.08),
];

pub fn reference_stats(name: &str) -> Option<DatasetStats> {
    REFERENCE_STATS.iter().find(|r| r.0.eq_ignore_ascii_case(name)).map(
        |&(_, graphs, classes, mean_nodes, mean_edges)| DatasetStats {
            graphs,
            classes,
            mean_nodes,
            mean_edges,
        },
    )
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_int(path: &Path, line: usize, s: &str) -> Result<i64> {
    s.trim().parse().map_err(|_| Error::Format {
        path: path.into(),
        line,
        detail: format!("expected an integer, got `{s}`"),
    })
}

fn read_ints(path: &Path) -> Result<Vec<(usize, i64)>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, s)| Ok((line, parse_int(path, line, &s)?)))
        .collect()
}

/// Sorted distinct values mapped to `0..k`.
fn remap(values: &[i64]) -> (Vec<usize>, usize) {
    let distinct: Vec<i64> = values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mapped = values
        .iter()
        .map(|v| distinct.binary_search(v).expect("value present"))
        .collect();
    (mapped, distinct.len())
}

pub fn load_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let indicator_path = file("graph_indicator");
    let indicator = read_ints(&indicator_path)?;
    let labels_path = file("graph_labels");
    let graph_labels = read_ints(&labels_path)?;
    let edges_path = file("A");
    let edge_lines = read_lines(&edges_path)?;
    let node_labels_path = file("node_labels");
    let node_labels = if node_labels_path.exists() {
        Some(read_ints(&node_labels_path)?)
    } else {
        None
    };

    let num_graphs = graph_labels.len();
    let num_nodes = indicator.len();
    if num_graphs == 0 {
        return Err(Error::Validation(format!("{name}: no graphs")));
    }

    // node -> (graph, local index)
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    let mut placement = Vec::with_capacity(num_nodes);
    for &(line, gid) in &indicator {
        if gid < 1 || gid as usize > num_graphs {
            return Err(Error::Format {
                path: indicator_path.clone(),
                line,
                detail: format!("graph id {gid} outside 1..={num_graphs}"),
            });
        }
        let g = gid as usize - 1;
        placement.push((g, members[g].len()));
        members[g].push(placement.len() - 1);
    }
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(Error::Validation(format!("{name}: graph {} has no nodes", empty + 1)));
    }

    let mut adjacency: Vec<Array2<f64>> = members.iter().map(|m| Array2::zeros((m.len(), m.len()))).collect();
    for (line, text) in &edge_lines {
        let bad = |detail: String| Error::Format {
            path: edges_path.clone(),
            line: *line,
            detail,
        };
        let mut parts = text.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("expected `i, j`, got `{text}`")));
        };
        let (a, b) = (parse_int(&edges_path, *line, a)?, parse_int(&edges_path, *line, b)?);
        let node = |v: i64| {
            if v < 1 || v as usize > num_nodes {
                Err(bad(format!("node {v} outside 1..={num_nodes}")))
            } else {
                Ok(placement[v as usize - 1])
            }
        };
        let ((ga, ia), (gb, ib)) = (node(a)?, node(b)?);
        if ga != gb {
            return Err(bad(format!(
                "edge ({a}, {b}) joins graph {} and graph {}",
                ga + 1,
                gb + 1
            )));
        }
        if ia != ib {
            adjacency[ga][[ia, ib]] = 1.0;
            adjacency[ga][[ib, ia]] = 1.0;
        }
    }

    let (labels, num_classes) = remap(&graph_labels.iter().map(|&(_, v)| v).collect::<Vec<_>>());

    let node_label_onehot = match node_labels {
        Some(ref nl) => {
            if nl.len() != num_nodes {
                return Err(Error::Format {
                    path: node_labels_path.clone(),
                    line: nl.len().min(num_nodes) + 1,
                    detail: format!("{} node labels for {num_nodes} nodes", nl.len()),
                });
            }
            Some(remap(&nl.iter().map(|&(_, v)| v).collect::<Vec<_>>()))
        }
        None => None,
    };

    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, nodes) in members.iter().enumerate() {
        let a = std::mem::take(&mut adjacency[g]);
        let x = match &node_label_onehot {
            Some((mapped, k)) => {
                let mut x = Array2::zeros((nodes.len(), *k));
                for (i, &v) in nodes.iter().enumerate() {
                    x[[i, mapped[v]]] = 1.0;
                }
                x
            }
            None => {
                let mut x = Array2::zeros((nodes.len(), DEGREE_CAP + 1));
                for (i, row) in a.rows().into_iter().enumerate() {
                    let deg = row.iter().filter(|&&v| v != 0.0).count();
                    x[[i, deg.min(DEGREE_CAP)]] = 1.0;
                }
                x
            }
        };
        graphs.push(Graph::new(a, x, labels[g])?);
    }
    GraphDataset::new(name, graphs, num_classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub classes: usize,
    pub mean_nodes: f64,
    /// Each undirected edge counted once.
    pub mean_edges: f64,
}

pub fn dataset_stats(ds: &GraphDataset) -> Result<DatasetStats> {
    if ds.is_empty() {
        return Err(Error::Validation("statistics of an empty dataset".into()));
    }
    let n = ds.len() as f64;
    Ok(DatasetStats {
        graphs: ds.len(),
        classes: ds.num_classes,
        mean_nodes: ds.graphs.iter().map(|g| g.num_nodes() as f64).sum::<f64>() / n,
        mean_edges: ds.graphs.iter().map(|g| g.num_edges() as f64).sum::<f64>() / n,
    })
}
