//! Building blocks of the network, exposed individually so each one can be
//! checked against a direct formula.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::graph::{add_self_loops, sym_normalize};
use crate::numerics::{relu, softmax, softmax_rows};

fn check_inner(op: &'static str, left: (&str, ArrayView2<f64>), right: (&str, ArrayView2<f64>)) -> Result<()> {
    if left.1.ncols() != right.1.nrows() {
        return Err(Error::dim(
            op,
            format!(
                "{} is {}x{} but {} is {}x{}",
                left.0,
                left.1.nrows(),
                left.1.ncols(),
                right.0,
                right.1.nrows(),
                right.1.ncols()
            ),
        ));
    }
    Ok(())
}

/// One propagation step `relu(A_hat H W)`.
pub fn gcn_layer(a_hat: &Array2<f64>, h: &Array2<f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
    check_inner("gcn_layer", ("A_hat", a_hat.view()), ("H", h.view()))?;
    check_inner("gcn_layer", ("H", h.view()), ("W", w.view()))?;
    if a_hat.nrows() != a_hat.ncols() {
        return Err(Error::dim("gcn_layer", "A_hat must be square"));
    }
    Ok(relu(&a_hat.dot(h).dot(w)))
}

pub fn normalized_adjacency(a: &Array2<f64>) -> Result<Array2<f64>> {
    sym_normalize(&add_self_loops(a)?)
}

/// `K` chained propagation steps on the normalized adjacency of `a`.
pub fn gnn_block(a: &Array2<f64>, x: &Array2<f64>, weights: &[&Array2<f64>]) -> Result<Array2<f64>> {
    let a_hat = normalized_adjacency(a)?;
    gnn_block_normalized(&a_hat, x, weights)
}

pub(crate) fn gnn_block_normalized(
    a_hat: &Array2<f64>,
    x: &Array2<f64>,
    weights: &[&Array2<f64>],
) -> Result<Array2<f64>> {
    if weights.is_empty() {
        return Err(Error::Validation("GNN block needs at least one weight".into()));
    }
    let mut h = x.clone();
    for w in weights {
        h = gcn_layer(a_hat, &h, w)?;
    }
    Ok(h)
}

/// Soft cluster assignment `softmax_rows(gnn_block(A, X))`.
pub fn assignment_matrix(a: &Array2<f64>, x: &Array2<f64>, pool_weights: &[&Array2<f64>]) -> Result<Array2<f64>> {
    Ok(softmax_rows(&gnn_block(a, x, pool_weights)?))
}

/// Pools node representations and connectivity into clusters:
/// `(C^T H, C^T A C)`.
pub fn coarsen(c: &Array2<f64>, h: &Array2<f64>, a: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    if c.nrows() != h.nrows() || a.nrows() != c.nrows() || a.ncols() != c.nrows() {
        return Err(Error::dim(
            "coarsen",
            format!("C is {:?}, H is {:?}, A is {:?}", c.dim(), h.dim(), a.dim()),
        ));
    }
    let ct = c.t();
    let x_next = ct.dot(h);
    let a_next = ct.dot(&a.dot(c));
    Ok((x_next, symmetrize(a_next)))
}

/// Averages `m` with its transpose so rounding noise cannot break symmetry.
pub(crate) fn symmetrize(m: Array2<f64>) -> Array2<f64> {
    let t = m.t().to_owned();
    (&m + &t) * 0.5
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Scores `theta(i) = sigmoid(Z(i) . w)` together with their normalized form `theta(i) / sum theta`.
///
/// The normalization runs in log space so that it stays defined when every
/// score underflows to zero.
pub(crate) fn readout_weights(z: &Array2<f64>, w: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    let a = z.dot(&w);
    let theta = a.mapv(sigmoid);
    let log_theta = a.mapv(log_sigmoid);
    let top = log_theta.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut pi = log_theta.mapv(|v| (v - top).exp());
    let total = pi.sum();
    pi /= total;
    (theta, pi)
}

/// Weighted mean of node rows with learned positive node scores.
pub fn importance_readout(z: &Array2<f64>, w: ArrayView1<f64>) -> Array1<f64> {
    let (_, pi) = readout_weights(z, w);
    pi.dot(z)
}

/// Scales one channel readout to unit component sum (zero stays zero).
pub fn normalize_block(s: &Array1<f64>, eps: f64) -> Array1<f64> {
    let total = s.sum() + eps;
    s / total
}

/// Concatenation of the normalized per-channel readouts, channel 0 first.
pub fn global_readout(blocks: &[Array1<f64>], eps: f64) -> Array1<f64> {
    let parts: Vec<Array1<f64>> = blocks.iter().map(|b| normalize_block(b, eps)).collect();
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(Axis(0), &views).unwrap_or_else(|_| Array1::zeros(0))
}

/// `softmax(S W + b)`.
pub fn classify(s: &Array1<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    if s.len() != w.nrows() || b.len() != w.ncols() {
        return Err(Error::dim(
            "classify",
            format!("S has {} entries, W is {:?}, b has {}", s.len(), w.dim(), b.len()),
        ));
    }
    Ok(softmax(&(s.dot(w) + b)))
}
