//! Reverse-mode gradients of the loss with respect to every parameter.

use ndarray::{s, Array1, Array2, Axis};

use super::forward::{forward_trace, trace_loss, BlockTrace, ChannelTrace};
use super::params::{conv_name, importance_name, pool_name, CLASSIFIER_BIAS, CLASSIFIER_WEIGHT};
use super::{ModelParams, PoolingConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::ParamStore;

/// Loss, prediction and parameter gradients for one graph.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub probs: Array1<f64>,
    /// Same names and shapes as the parameter store.
    pub grads: ParamStore,
}

/// Backpropagates through one GNN block. Returns `(dX, dA_hat)`; either is
/// skipped when not requested.
fn block_backward(
    a_hat: &Array2<f64>,
    tr: &BlockTrace,
    weights: &[&Array2<f64>],
    mut dh: Array2<f64>,
    weight_grads: &mut [Array2<f64>],
    need_inputs: bool,
) -> (Option<Array2<f64>>, Option<Array2<f64>>) {
    let n = a_hat.nrows();
    let mut da_hat = need_inputs.then(|| Array2::<f64>::zeros((n, n)));
    for k in (0..weights.len()).rev() {
        let mut dp = dh;
        dp.zip_mut_with(&tr.pre[k], |g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        weight_grads[k] = tr.propagated[k].t().dot(&dp);
        let dm = dp.dot(&weights[k].t());
        if let Some(da) = da_hat.as_mut() {
            *da += &dm.dot(&tr.inputs[k].t());
        }
        if k == 0 && !need_inputs {
            return (None, None);
        }
        // A_hat is symmetric.
        dh = a_hat.dot(&dm);
    }
    (Some(dh), da_hat)
}

/// Gradient of the raw adjacency from a gradient of its normalized form.
fn normalize_backward(ch: &ChannelTrace, da_hat: &Array2<f64>) -> Array2<f64> {
    let n = da_hat.nrows();
    let r = &ch.inv_sqrt_deg;
    let looped = &ch.looped;
    let mut dd = vec![0.0; n];
    for i in 0..n {
        let mut dr = 0.0;
        for j in 0..n {
            dr += looped[[i, j]] * r[j] * (da_hat[[i, j]] + da_hat[[j, i]]);
        }
        dd[i] = -0.5 * r[i] * r[i] * r[i] * dr;
    }
    Array2::from_shape_fn((n, n), |(i, j)| da_hat[[i, j]] * r[i] * r[j] + dd[i])
}

/// Gradient of the loss through `softmax_rows`, with the entropy penalty on
/// the assignment added first.
fn assignment_backward(c: &Array2<f64>, mut dc: Array2<f64>, entropy_weight: f64) -> Array2<f64> {
    if entropy_weight != 0.0 {
        // d/dC of -w * sum C ln C is -w (ln C + 1); the constant vanishes
        // under the softmax Jacobian, and entries with C = 0 are multiplied
        // by C below.
        dc.zip_mut_with(c, |g, &p| {
            if p > 0.0 {
                *g -= entropy_weight * p.ln();
            }
        });
    }
    let mut dg = c * &dc;
    let row_dot = dg.sum_axis(Axis(1));
    for (i, mut row) in dg.rows_mut().into_iter().enumerate() {
        let ci = c.row(i);
        row.zip_mut_with(&ci, |g, &p| *g -= p * row_dot[i]);
    }
    dg
}

pub(crate) fn backward(
    trace: &super::forward::Trace,
    label: usize,
    params: &ModelParams,
    cfg: &PoolingConfig,
) -> Result<ParamStore> {
    let d = cfg.hidden_dim;
    let k = cfg.iterations;
    let mut grads = params.store().zeros_like();

    let mut dlogits = trace.probs.clone();
    if trace.probs[label] > cfg.epsilon {
        dlogits[label] -= 1.0;
    } else {
        // The log argument is clamped, so the cross-entropy is locally flat.
        dlogits.fill(0.0);
    }
    let global = &trace.global;
    *grads.expect_mut(CLASSIFIER_WEIGHT) = global
        .view()
        .insert_axis(Axis(1))
        .dot(&dlogits.view().insert_axis(Axis(0)));
    grads.expect_mut(CLASSIFIER_BIAS).row_mut(0).assign(&dlogits);
    let dglobal = params.classifier_weight().dot(&dlogits);

    // Gradients flowing into the features and adjacency of the next channel.
    let mut downstream: Option<(Array2<f64>, Array2<f64>)> = None;
    for l in (0..=cfg.layers).rev() {
        let ch = &trace.channels[l];
        let z = &ch.conv.output;

        // Block normalization.
        let ds = dglobal.slice(s![l * d..(l + 1) * d]);
        let sv = &ch.readout;
        let total = sv.sum() + cfg.epsilon;
        let proj = ds.dot(sv) / (total * total);
        let dsv = ds.mapv(|v| v / total - proj);

        // Importance-weighted readout.
        let theta = &ch.theta;
        let pi = &ch.weights;
        let w_imp = params.importance(l).column(0);
        let centered = z - &sv.view().insert_axis(Axis(0));
        let da = Array1::from_shape_fn(theta.len(), |i| (1.0 - theta[i]) * pi[i] * centered.row(i).dot(&dsv));
        let mut dz = pi.view().insert_axis(Axis(1)).dot(&dsv.view().insert_axis(Axis(0)));
        dz += &da.view().insert_axis(Axis(1)).dot(&w_imp.insert_axis(Axis(0)));
        *grads.expect_mut(&importance_name(l)) = z.t().dot(&da).insert_axis(Axis(1));

        // Coarsening into the next channel.
        let mut da_raw: Option<Array2<f64>> = None;
        let mut dpool: Option<Array2<f64>> = None;
        if let Some(c) = ch.assignment.as_ref() {
            let (dx_next, da_next) = downstream.take().ok_or_else(|| Error::Numerical {
                location: format!("layer {l} missing downstream gradient"),
            })?;
            dz += &c.dot(&dx_next);
            let mut dc = z.dot(&dx_next.t());
            let dm = (&da_next + &da_next.t()) * 0.5;
            let cdm = c.dot(&dm);
            dc += &(ch.adjacency.dot(&cdm) * 2.0);
            if l > 0 {
                da_raw = Some(cdm.dot(&c.t()));
            }
            let weight = cfg.entropy_coeff / c.nrows() as f64;
            dpool = Some(assignment_backward(c, dc, weight));
        }

        let need_inputs = l > 0;
        let mut conv_grads = vec![Array2::zeros((0, 0)); k];
        let (dx_conv, da_conv) = block_backward(
            &ch.a_hat,
            &ch.conv,
            &params.conv_stack(l, k),
            dz,
            &mut conv_grads,
            need_inputs,
        );
        for (step, g) in conv_grads.into_iter().enumerate() {
            *grads.expect_mut(&conv_name(l, step)) = g;
        }
        let mut dx = dx_conv;
        let mut da_hat = da_conv;
        if let (Some(dp), Some(pool)) = (dpool, ch.pool.as_ref()) {
            let mut pool_grads = vec![Array2::zeros((0, 0)); k];
            let (dx_pool, da_pool) = block_backward(
                &ch.a_hat,
                pool,
                &params.pool_stack(l, k),
                dp,
                &mut pool_grads,
                need_inputs,
            );
            for (step, g) in pool_grads.into_iter().enumerate() {
                *grads.expect_mut(&pool_name(l, step)) = g;
            }
            if let (Some(a), Some(b)) = (dx.as_mut(), dx_pool) {
                *a += &b;
            }
            if let (Some(a), Some(b)) = (da_hat.as_mut(), da_pool) {
                *a += &b;
            }
        }

        if let (Some(dx), Some(da_hat)) = (dx, da_hat) {
            let mut da = normalize_backward(ch, &da_hat);
            if let Some(extra) = da_raw {
                da += &extra;
            }
            downstream = Some((dx, da));
        }
    }

    if !grads.all_finite() {
        let name = grads
            .iter()
            .find(|(_, t)| !t.iter().all(|v| v.is_finite()))
            .map(|(n, _)| n.to_string())
            .unwrap_or_default();
        return Err(Error::Numerical {
            location: format!("gradient of {name}"),
        });
    }
    Ok(grads)
}

/// Loss and analytic gradients for a single labelled graph.
pub fn param_gradients(g: &Graph, params: &ModelParams, cfg: &PoolingConfig) -> Result<Gradients> {
    let trace = forward_trace(g, params, cfg)?;
    let loss = trace_loss(&trace, g.label(), cfg);
    if !loss.is_finite() {
        return Err(Error::Numerical {
            location: "loss".into(),
        });
    }
    let grads = backward(&trace, g.label(), params, cfg)?;
    Ok(Gradients {
        loss,
        probs: trace.probs,
        grads,
    })
}
