//! On-disk dataset directory: `manifest.json` plus one JSON file per graph.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub num_classes: usize,
    pub graph_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    node_ids: Option<Vec<String>>,
    target_index: Option<usize>,
    adjacency: Vec<Vec<f64>>,
    features: Vec<Vec<f64>>,
    label: usize,
}

fn graph_file_name(i: usize) -> String {
    format!("graph_{i:06}.json")
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, cols_if_empty: usize, path: &Path) -> Result<Array2<f64>> {
    let n = rows.len();
    let cols = rows.first().map_or(cols_if_empty, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, cols), flat).map_err(|_| Error::Format {
        path: path.into(),
        line: 0,
        detail: "ragged matrix rows".into(),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

pub fn write_dataset(dir: impl AsRef<Path>, ds: &GraphDataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, g) in ds.graphs.iter().enumerate() {
        let file = GraphFile {
            node_ids: g.node_ids().map(<[String]>::to_vec),
            target_index: g.target_index(),
            adjacency: rows(g.adjacency()),
            features: rows(g.features()),
            label: g.label(),
        };
        write_json(&dir.join(graph_file_name(i)), &file)?;
    }
    let manifest = DatasetManifest {
        name: ds.name.clone(),
        num_classes: ds.num_classes,
        graph_count: ds.len(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let mut graphs = Vec::with_capacity(manifest.graph_count);
    for i in 0..manifest.graph_count {
        let path: PathBuf = dir.join(graph_file_name(i));
        let file: GraphFile = read_json(&path)?;
        let n = file.adjacency.len();
        let adjacency = from_rows(file.adjacency, n, &path)?;
        let features = from_rows(file.features, 0, &path)?;
        let mut g = Graph::new(adjacency, features, file.label)?;
        if let Some(ids) = file.node_ids {
            g = g.with_node_ids(ids)?;
        }
        if let Some(t) = file.target_index {
            g = g.with_target(t)?;
        }
        graphs.push(g);
    }
    GraphDataset::new(manifest.name, graphs, manifest.num_classes)
}
