//! K-order transaction pattern graphs: the induced subgraph on every
//! address within K hops of a target, plus per-node transaction features.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{MergedEdge, MergedEdges};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_K_ORDER: usize = 4;
pub const DEFAULT_MAX_NODES: usize = 1000;
/// Width of the feature rows produced by [`build_node_features`].
pub const NODE_FEATURE_DIM: usize = 7;

/// 365 days.
const SECONDS_PER_YEAR: f64 = 31_536_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeWeighting {
    /// 1 for every merged edge.
    #[default]
    Binary,
    /// `ln(1 + a)` with `a` the larger directional total.
    LogAmount,
}

impl fmt::Display for EdgeWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeWeighting::Binary => "binary",
            EdgeWeighting::LogAmount => "log-amount",
        })
    }
}

impl FromStr for EdgeWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(EdgeWeighting::Binary),
            "log-amount" => Ok(EdgeWeighting::LogAmount),
            other => Err(Error::Validation(format!(
                "unknown edge weighting `{other}` (expected binary or log-amount)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternOptions {
    pub k_order: usize,
    /// Nodes beyond this count are dropped, farthest first, ties broken by
    /// address order.
    pub max_nodes: usize,
    pub edge_weights: EdgeWeighting,
}

impl Default for PatternOptions {
    fn default() -> Self {
        PatternOptions {
            k_order: DEFAULT_K_ORDER,
            max_nodes: DEFAULT_MAX_NODES,
            edge_weights: EdgeWeighting::Binary,
        }
    }
}

/// Adjacency-list view over a merged edge set, shared read-only by every
/// pattern-graph extraction.
pub struct TxNetwork<'a> {
    addrs: Vec<&'a str>,
    index: HashMap<&'a str, usize>,
    adj: Vec<Vec<(usize, &'a MergedEdge)>>,
}

impl<'a> TxNetwork<'a> {
    pub fn new(edges: &'a MergedEdges) -> Self {
        let mut net = TxNetwork {
            addrs: Vec::new(),
            index: HashMap::new(),
            adj: Vec::new(),
        };
        for e in edges.values() {
            let a = net.intern(&e.endpoints.0);
            let b = net.intern(&e.endpoints.1);
            net.adj[a].push((b, e));
            net.adj[b].push((a, e));
        }
        net
    }

    fn intern(&mut self, addr: &'a str) -> usize {
        if let Some(&i) = self.index.get(addr) {
            return i;
        }
        let i = self.addrs.len();
        self.addrs.push(addr);
        self.index.insert(addr, i);
        self.adj.push(Vec::new());
        i
    }

    pub fn num_addresses(&self) -> usize {
        self.addrs.len()
    }

    pub fn contains(&self, addr: &str) -> bool {
        self.index.contains_key(addr)
    }

    /// Number of distinct counterparties of `addr`.
    pub fn degree(&self, addr: &str) -> Option<usize> {
        self.index.get(addr).map(|&i| self.adj[i].len())
    }

    /// Breadth-first distances from `target`, limited to `k` hops.
    fn ball(&self, target: usize, k: usize) -> Vec<(usize, usize)> {
        let mut dist: HashMap<usize, usize> = HashMap::from([(target, 0)]);
        let mut queue = VecDeque::from([target]);
        let mut out = vec![(target, 0)];
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            if d == k {
                continue;
            }
            for &(v, _) in &self.adj[u] {
                if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(v) {
                    slot.insert(d + 1);
                    out.push((v, d + 1));
                    queue.push_back(v);
                }
            }
        }
        out
    }

    /// Induced subgraph on the `k_order` ball around `target`, with node
    /// features from [`TxNetwork::node_features`]. Nodes are ordered by
    /// distance, then address, so the target is always node 0.
    pub fn pattern_graph(&self, target: &str, opts: &PatternOptions) -> Result<Graph> {
        let &t = self
            .index
            .get(target)
            .ok_or_else(|| Error::UnknownAddress(target.to_string()))?;
        if opts.max_nodes == 0 {
            return Err(Error::Validation("max_nodes must be at least 1".into()));
        }
        let mut ball = self.ball(t, opts.k_order);
        ball.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| self.addrs[a.0].cmp(self.addrs[b.0])));
        ball.truncate(opts.max_nodes);

        let local: HashMap<usize, usize> = ball.iter().enumerate().map(|(i, &(g, _))| (g, i)).collect();
        let n = ball.len();
        let mut adjacency = Array2::zeros((n, n));
        for (i, &(u, _)) in ball.iter().enumerate() {
            for &(v, e) in &self.adj[u] {
                if let Some(&j) = local.get(&v) {
                    adjacency[[i, j]] = match opts.edge_weights {
                        EdgeWeighting::Binary => 1.0,
                        EdgeWeighting::LogAmount => e.max_amount().ln_1p(),
                    };
                }
            }
        }
        let ids: Vec<String> = ball.iter().map(|&(u, _)| self.addrs[u].to_string()).collect();
        let placeholder = Array2::zeros((n, 0));
        let g = Graph::new(adjacency, placeholder, 0)?
            .with_node_ids(ids)?
            .with_target(0)?;
        let features = self.node_features(&g)?;
        g.with_features(features)
    }

    /// Per-node features restricted to edges inside `g`:
    ///
    /// | col | feature |
    /// |-----|---------|
    /// | 0 | `ln(1 + received amount)` |
    /// | 1 | `ln(1 + sent amount)` |
    /// | 2 | counterparties that sent to the node |
    /// | 3 | counterparties the node sent to |
    /// | 4 | incident merged edges |
    /// | 5 | mean activity time minus the target's, in years |
    /// | 6 | 1 for the target node |
    ///
    /// Activity time is the record-weighted mean of incident edge timestamps.
    pub fn node_features(&self, g: &Graph) -> Result<Array2<f64>> {
        let ids = g
            .node_ids()
            .ok_or_else(|| Error::Validation("node features need node ids".into()))?;
        let local: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let n = ids.len();
        let mut x = Array2::zeros((n, NODE_FEATURE_DIM));
        let mut mean_ts: Vec<Option<f64>> = vec![None; n];
        for (i, id) in ids.iter().enumerate() {
            let Some(&u) = self.index.get(id.as_str()) else {
                return Err(Error::UnknownAddress(id.clone()));
            };
            let (mut recv, mut sent, mut ts_sum, mut ts_n) = (0.0, 0.0, 0.0, 0usize);
            let (mut in_deg, mut out_deg, mut edges) = (0usize, 0usize, 0usize);
            for &(v, e) in &self.adj[u] {
                if !local.contains_key(self.addrs[v]) {
                    continue;
                }
                recv += e.received_by(id);
                sent += e.sent_by(id);
                in_deg += usize::from(e.sends_to(id) > 0);
                out_deg += usize::from(e.sends_from(id) > 0);
                edges += 1;
                ts_sum += e.mean_timestamp * e.record_count as f64;
                ts_n += e.record_count;
            }
            x[[i, 0]] = recv.ln_1p();
            x[[i, 1]] = sent.ln_1p();
            x[[i, 2]] = in_deg as f64;
            x[[i, 3]] = out_deg as f64;
            x[[i, 4]] = edges as f64;
            if ts_n > 0 {
                mean_ts[i] = Some(ts_sum / ts_n as f64);
            }
        }
        let target = g.target_index();
        let target_ts = target.and_then(|t| mean_ts[t]);
        for i in 0..n {
            if let (Some(ts), Some(base)) = (mean_ts[i], target_ts) {
                x[[i, 5]] = (ts - base) / SECONDS_PER_YEAR;
            }
            if Some(i) == target {
                x[[i, 6]] = 1.0;
            }
        }
        Ok(x)
    }
}

/// Pattern graph of radius `k` around `target` with default options.
pub fn build_pattern_graph(target: &str, edges: &MergedEdges, k: usize) -> Result<Graph> {
    let opts = PatternOptions {
        k_order: k,
        ..PatternOptions::default()
    };
    TxNetwork::new(edges).pattern_graph(target, &opts)
}

pub fn build_node_features(g: &Graph, edges: &MergedEdges) -> Result<Array2<f64>> {
    TxNetwork::new(edges).node_features(g)
}
