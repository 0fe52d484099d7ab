use ndarray::{Array1, Array2};

use super::layers::{coarsen, global_readout, readout_weights};
use super::{ModelParams, PoolingConfig};
use crate::error::{Error, Result};
use crate::graph::{add_self_loops, inv_sqrt_degrees, Graph};
use crate::numerics::{softmax, softmax_rows, xlogx};

/// Intermediate values of one channel, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// `A^l` (raw, no self-loops).
    pub adjacency: Array2<f64>,
    /// `X^l`.
    pub features: Array2<f64>,
    /// Convolution output `Z_l`.
    pub node_repr: Array2<f64>,
    /// `C^l`; absent on the last channel.
    pub assignment: Option<Array2<f64>>,
    /// Channel readout `S_l` before normalization.
    pub readout: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub channels: Vec<ChannelState>,
    /// Concatenated normalized readouts fed to the classifier.
    pub global: Array1<f64>,
}

impl LayerState {
    pub fn assignments(&self) -> Vec<&Array2<f64>> {
        self.channels.iter().filter_map(|c| c.assignment.as_ref()).collect()
    }
}

/// Cached activations of one GNN block.
#[derive(Debug, Clone)]
pub(crate) struct BlockTrace {
    /// `H_{k-1}` for every step.
    pub inputs: Vec<Array2<f64>>,
    /// `A_hat H_{k-1}`.
    pub propagated: Vec<Array2<f64>>,
    /// Pre-activation `A_hat H_{k-1} W_k`.
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct ChannelTrace {
    pub adjacency: Array2<f64>,
    /// `A + I`.
    pub looped: Array2<f64>,
    pub inv_sqrt_deg: Vec<f64>,
    pub a_hat: Array2<f64>,
    pub features: Array2<f64>,
    pub conv: BlockTrace,
    pub pool: Option<BlockTrace>,
    pub assignment: Option<Array2<f64>>,
    pub theta: Array1<f64>,
    /// `theta` normalized to sum to one.
    pub weights: Array1<f64>,
    pub readout: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub channels: Vec<ChannelTrace>,
    pub global: Array1<f64>,
    pub probs: Array1<f64>,
}

fn run_block(a_hat: &Array2<f64>, x: &Array2<f64>, weights: &[&Array2<f64>]) -> BlockTrace {
    let k = weights.len();
    let mut tr = BlockTrace {
        inputs: Vec::with_capacity(k),
        propagated: Vec::with_capacity(k),
        pre: Vec::with_capacity(k),
        output: Array2::zeros((0, 0)),
    };
    let mut h = x.clone();
    for w in weights {
        let m = a_hat.dot(&h);
        let p = m.dot(*w);
        let next = p.mapv(|v| v.max(0.0));
        tr.inputs.push(h);
        tr.propagated.push(m);
        tr.pre.push(p);
        h = next;
    }
    tr.output = h;
    tr
}

fn check_finite(what: &str, layer: usize, m: impl IntoIterator<Item = f64>) -> Result<()> {
    if m.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::Numerical {
            location: format!("layer {layer} {what}"),
        })
    }
}

pub(crate) fn forward_trace(g: &Graph, params: &ModelParams, cfg: &PoolingConfig) -> Result<Trace> {
    if g.feature_dim() != params.input_dim() {
        return Err(Error::dim(
            "forward",
            format!(
                "graph has {} features but the model expects {}",
                g.feature_dim(),
                params.input_dim()
            ),
        ));
    }
    let k = cfg.iterations;
    let mut channels = Vec::with_capacity(cfg.layers + 1);
    let mut adjacency = g.adjacency().clone();
    let mut features = g.features().clone();
    for l in 0..=cfg.layers {
        let looped = add_self_loops(&adjacency)?;
        let inv_sqrt_deg = inv_sqrt_degrees(&looped).map_err(|_| Error::Numerical {
            location: format!("layer {l} degree normalization"),
        })?;
        let n = looped.nrows();
        let a_hat = Array2::from_shape_fn((n, n), |(i, j)| looped[[i, j]] * (inv_sqrt_deg[i] * inv_sqrt_deg[j]));

        let conv = run_block(&a_hat, &features, &params.conv_stack(l, k));
        check_finite("convolution", l, conv.output.iter().copied())?;

        let (theta, weights) = readout_weights(&conv.output, params.importance(l).column(0));
        let readout = weights.dot(&conv.output);
        check_finite("readout", l, readout.iter().copied())?;

        let (pool, assignment, next) = if l < cfg.layers {
            let pool = run_block(&a_hat, &features, &params.pool_stack(l, k));
            let c = softmax_rows(&pool.output);
            check_finite("assignment", l, c.iter().copied())?;
            let next = coarsen(&c, &conv.output, &adjacency)?;
            (Some(pool), Some(c), Some(next))
        } else {
            (None, None, None)
        };

        channels.push(ChannelTrace {
            adjacency: std::mem::take(&mut adjacency),
            looped,
            inv_sqrt_deg,
            a_hat,
            features: std::mem::take(&mut features),
            conv,
            pool,
            assignment,
            theta,
            weights,
            readout,
        });
        if let Some((x_next, a_next)) = next {
            features = x_next;
            adjacency = a_next;
        }
    }

    let blocks: Vec<Array1<f64>> = channels.iter().map(|c| c.readout.clone()).collect();
    let global = global_readout(&blocks, cfg.epsilon);
    let logits = global.dot(params.classifier_weight()) + params.classifier_bias().row(0);
    let probs = softmax(&logits);
    check_finite("classifier", cfg.layers, probs.iter().copied())?;
    Ok(Trace {
        channels,
        global,
        probs,
    })
}

/// Class probabilities for `g` together with every channel's intermediates.
pub fn forward(g: &Graph, params: &ModelParams, cfg: &PoolingConfig) -> Result<(Array1<f64>, LayerState)> {
    let trace = forward_trace(g, params, cfg)?;
    let channels = trace
        .channels
        .into_iter()
        .map(|c| ChannelState {
            adjacency: c.adjacency,
            features: c.features,
            node_repr: c.conv.output,
            assignment: c.assignment,
            readout: c.readout,
        })
        .collect();
    Ok((
        trace.probs,
        LayerState {
            channels,
            global: trace.global,
        },
    ))
}

/// Class probabilities only.
pub fn predict_proba(g: &Graph, params: &ModelParams, cfg: &PoolingConfig) -> Result<Array1<f64>> {
    Ok(forward_trace(g, params, cfg)?.probs)
}

pub fn predict(g: &Graph, params: &ModelParams, cfg: &PoolingConfig) -> Result<usize> {
    Ok(argmax(&predict_proba(g, params, cfg)?))
}

pub(crate) fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean row entropy of an assignment matrix, `0 ln 0 = 0`.
pub(crate) fn mean_row_entropy(c: &Array2<f64>) -> f64 {
    let total: f64 = c
        .rows()
        .into_iter()
        .map(|r| -r.iter().map(|&p| xlogx(p)).sum::<f64>())
        .sum();
    total / c.nrows() as f64
}

/// Cross-entropy of the prediction plus `entropy_coeff` times the summed
/// mean row entropy of every assignment matrix.
pub fn mcgc_loss(probs: &Array1<f64>, label: usize, assignments: &[&Array2<f64>], cfg: &PoolingConfig) -> f64 {
    let ce = -probs[label].max(cfg.epsilon).ln();
    let entropy: f64 = assignments.iter().map(|c| mean_row_entropy(c)).sum();
    ce + cfg.entropy_coeff * entropy
}

pub(crate) fn trace_loss(trace: &Trace, label: usize, cfg: &PoolingConfig) -> f64 {
    let cs: Vec<&Array2<f64>> = trace.channels.iter().filter_map(|c| c.assignment.as_ref()).collect();
    mcgc_loss(&trace.probs, label, &cs, cfg)
}

/// Loss of `g` under `params`.
pub fn graph_loss(g: &Graph, params: &ModelParams, cfg: &PoolingConfig) -> Result<f64> {
    let trace = forward_trace(g, params, cfg)?;
    Ok(trace_loss(&trace, g.label(), cfg))
}
