use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::PoolingConfig;

/// Fraction of predictions equal to the truth.
pub fn evaluate_accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Validation("accuracy of an empty set".into()));
    }
    let correct = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Mean loss and accuracy over one pass, measured on each graph just before
/// its update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub test_accuracy: f64,
}

/// Everything a run reports. Wall-clock timings live in `epoch_seconds` and
/// are left out of the JSON so that reruns compare byte-for-byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train: TrainConfig,
    pub model: PoolingConfig,
    /// One curve per trained model (one per fold for cross-validation).
    pub curves: Vec<Vec<EpochRecord>>,
    pub folds: Vec<FoldRecord>,
    pub mean_accuracy: Option<f64>,
    /// Population standard deviation across folds.
    pub std_accuracy: Option<f64>,
    #[serde(skip)]
    pub epoch_seconds: Vec<Vec<f64>>,
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Serialize)]
struct Timing<'a> {
    epoch_seconds: &'a [Vec<f64>],
    total_seconds: f64,
}

impl Metrics {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: "<metrics>".into(),
            source,
        })
    }

    pub fn timing_json(&self) -> String {
        let t = Timing {
            epoch_seconds: &self.epoch_seconds,
            total_seconds: self.total_seconds(),
        };
        serde_json::to_string_pretty(&t).unwrap_or_default()
    }

    pub fn total_seconds(&self) -> f64 {
        self.epoch_seconds.iter().flatten().sum()
    }

    pub fn mean_epoch_seconds(&self) -> f64 {
        let n: usize = self.epoch_seconds.iter().map(Vec::len).sum();
        if n == 0 {
            0.0
        } else {
            self.total_seconds() / n as f64
        }
    }

    /// Aligned plain-text summary.
    pub fn table(&self) -> String {
        let mut out = String::new();
        if self.folds.is_empty() {
            let _ = writeln!(out, "{:>6}  {:>12}  {:>10}", "epoch", "train_loss", "train_acc");
            for r in self.curves.iter().flatten() {
                let _ = writeln!(
                    out,
                    "{:>6}  {:>12.6}  {:>10.6}",
                    r.epoch, r.train_loss, r.train_accuracy
                );
            }
        } else {
            let _ = writeln!(out, "{:>6}  {:>6}  {:>6}  {:>10}", "fold", "train", "test", "accuracy");
            for f in &self.folds {
                let _ = writeln!(
                    out,
                    "{:>6}  {:>6}  {:>6}  {:>10.6}",
                    f.fold, f.train_size, f.test_size, f.test_accuracy
                );
            }
            if let (Some(m), Some(s)) = (self.mean_accuracy, self.std_accuracy) {
                let _ = writeln!(out, "{:>6}  {:>6}  {:>6}  {:>10.6}", "mean", "", "", m);
                let _ = writeln!(out, "{:>6}  {:>6}  {:>6}  {:>10.6}", "std", "", "", s);
            }
        }
        let _ = writeln!(out, "seconds per epoch: {:.3}", self.mean_epoch_seconds());
        out
    }

    /// `curve,epoch,train_loss,train_accuracy,seconds` rows.
    pub fn write_curves_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["curve", "epoch", "train_loss", "train_accuracy", "seconds"])
            .map_err(|e| csv_err(path, e))?;
        for (c, curve) in self.curves.iter().enumerate() {
            for (i, r) in curve.iter().enumerate() {
                let secs = self.epoch_seconds.get(c).and_then(|s| s.get(i)).copied().unwrap_or(0.0);
                w.write_record([
                    c.to_string(),
                    r.epoch.to_string(),
                    r.train_loss.to_string(),
                    r.train_accuracy.to_string(),
                    format!("{secs:.6}"),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}
