use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::{evaluate_accuracy, mean_std, EpochRecord, FoldRecord, Metrics};
use super::{Optimizer, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};
use crate::model::{argmax, param_gradients, predict, ModelParams, PoolingConfig};

struct Fit {
    params: ModelParams,
    curve: Vec<EpochRecord>,
    seconds: Vec<f64>,
}

fn fit(
    graphs: &[(usize, &Graph)],
    input_dim: usize,
    num_classes: usize,
    cfg: &TrainConfig,
    pcfg: &PoolingConfig,
    seed: u64,
) -> Result<Fit> {
    if graphs.is_empty() {
        return Err(Error::Validation("cannot train on an empty set".into()));
    }
    let mut params = ModelParams::init(pcfg, input_dim, num_classes, seed)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.store())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Keep the shuffle stream apart from the one used for initialization.
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut seconds = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for group in order.chunks(cfg.accumulation) {
            let mut acc = None;
            for &i in group {
                let (orig, g) = graphs[i];
                let out = param_gradients(g, &params, pcfg).map_err(|e| match e {
                    Error::Numerical { location } => {
                        warn!("numerical failure at {location}");
                        Error::Diverged {
                            epoch,
                            graph: orig,
                            loss: f64::NAN,
                        }
                    }
                    other => other,
                })?;
                loss_sum += out.loss;
                if argmax(&out.probs) == g.label() {
                    correct += 1;
                }
                match acc.as_mut() {
                    None => acc = Some(out.grads),
                    Some(a) => a.add_scaled(&out.grads, 1.0),
                }
            }
            if let Some(mut grads) = acc {
                if group.len() > 1 {
                    grads.scale(1.0 / group.len() as f64);
                }
                opt.step(params.store_mut(), &grads)?;
            }
        }
        let n = graphs.len() as f64;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
        };
        if !rec.train_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                graph: graphs[order[0]].0,
                loss: rec.train_loss,
            });
        }
        log::debug!(
            "epoch {epoch}: loss {:.6} acc {:.4}",
            rec.train_loss,
            rec.train_accuracy
        );
        curve.push(rec);
        seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(Fit { params, curve, seconds })
}

fn check_dataset(ds: &GraphDataset) -> Result<usize> {
    ds.validate()?;
    if ds.is_empty() {
        return Err(Error::Validation("dataset is empty".into()));
    }
    ds.feature_dim()
}

/// Trains one model on the whole dataset.
pub fn train(ds: &GraphDataset, cfg: &TrainConfig, pcfg: &PoolingConfig) -> Result<(ModelParams, Metrics)> {
    cfg.validate()?;
    pcfg.validate()?;
    let input_dim = check_dataset(ds)?;
    let graphs: Vec<(usize, &Graph)> = ds.graphs.iter().enumerate().collect();
    let fit = fit(&graphs, input_dim, ds.num_classes, cfg, pcfg, cfg.seed)?;
    let metrics = Metrics {
        train: cfg.clone(),
        model: pcfg.clone(),
        curves: vec![fit.curve],
        folds: Vec::new(),
        mean_accuracy: None,
        std_accuracy: None,
        epoch_seconds: vec![fit.seconds],
    };
    Ok((fit.params, metrics))
}

/// Accuracy of `params` on every graph of `graphs`.
pub fn evaluate(graphs: &[Graph], params: &ModelParams, pcfg: &PoolingConfig) -> Result<f64> {
    let predictions = graphs
        .iter()
        .map(|g| predict(g, params, pcfg))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<usize> = graphs.iter().map(Graph::label).collect();
    evaluate_accuracy(&predictions, &truth)
}

/// Seeded stratified partition of `0..labels.len()` into `folds` test sets.
///
/// Each class is shuffled and dealt round-robin, continuing the deal across
/// classes, so fold sizes and per-class counts differ by at most one.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Validation(format!("folds must be >= 2, got {folds}")));
    }
    if labels.len() < folds {
        return Err(Error::Validation(format!(
            "{} graphs cannot fill {folds} folds",
            labels.len()
        )));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        match members.len() {
            0 => {}
            1 => {
                return Err(Error::Validation(format!(
                    "class {class} has a single graph, so the fold holding it has no training example of that class"
                )))
            }
            n if n < folds => warn!("class {class} has {n} graphs for {folds} folds; some test folds will lack it"),
            _ => {}
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for mut members in by_class {
        members.shuffle(&mut rng);
        for i in members {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Stratified k-fold cross-validation, folds run one after another.
pub fn kfold_cv(ds: &GraphDataset, cfg: &TrainConfig, pcfg: &PoolingConfig) -> Result<Metrics> {
    kfold_cv_jobs(ds, cfg, pcfg, 1)
}

/// Cross-validation with up to `jobs` folds in flight. Results do not depend
/// on `jobs`: every fold has its own seed and the reduction is ordered.
pub fn kfold_cv_jobs(ds: &GraphDataset, cfg: &TrainConfig, pcfg: &PoolingConfig, jobs: usize) -> Result<Metrics> {
    cfg.validate()?;
    pcfg.validate()?;
    let input_dim = check_dataset(ds)?;
    let folds = stratified_folds(&ds.labels(), cfg.folds, cfg.seed)?;

    let run_fold = |f: usize| -> Result<(FoldRecord, Vec<EpochRecord>, Vec<f64>)> {
        let test = &folds[f];
        let mut in_test = vec![false; ds.len()];
        for &i in test {
            in_test[i] = true;
        }
        let train_set: Vec<(usize, &Graph)> = ds.graphs.iter().enumerate().filter(|(i, _)| !in_test[*i]).collect();
        let seed = cfg.seed.wrapping_add(f as u64);
        let fit = fit(&train_set, input_dim, ds.num_classes, cfg, pcfg, seed)?;
        let test_graphs: Vec<Graph> = test.iter().map(|&i| ds.graphs[i].clone()).collect();
        let acc = evaluate(&test_graphs, &fit.params, pcfg)?;
        info!("fold {f}: test accuracy {acc:.6}");
        Ok((
            FoldRecord {
                fold: f,
                train_size: train_set.len(),
                test_size: test.len(),
                test_accuracy: acc,
            },
            fit.curve,
            fit.seconds,
        ))
    };

    let results: Vec<_> = if jobs <= 1 {
        (0..folds.len()).map(run_fold).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Validation(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| (0..folds.len()).into_par_iter().map(run_fold).collect::<Result<_>>())?
    };

    let mut metrics = Metrics {
        train: cfg.clone(),
        model: pcfg.clone(),
        curves: Vec::with_capacity(results.len()),
        folds: Vec::with_capacity(results.len()),
        mean_accuracy: None,
        std_accuracy: None,
        epoch_seconds: Vec::with_capacity(results.len()),
    };
    for (rec, curve, secs) in results {
        metrics.folds.push(rec);
        metrics.curves.push(curve);
        metrics.epoch_seconds.push(secs);
    }
    let accs: Vec<f64> = metrics.folds.iter().map(|f| f.test_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    metrics.mean_accuracy = Some(mean);
    metrics.std_accuracy = Some(std);
    Ok(metrics)
}
