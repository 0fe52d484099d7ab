use std::fmt;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One directed transfer between two addresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub from_addr: String,
    pub to_addr: String,
    pub amount: f64,
    /// Unix seconds.
    pub timestamp: i64,
}

impl TxRecord {
    pub fn new(from: impl Into<String>, to: impl Into<String>, amount: f64, timestamp: i64) -> Self {
        TxRecord {
            from_addr: from.into(),
            to_addr: to.into(),
            amount,
            timestamp,
        }
    }
}

/// A row that could not be turned into a [`TxRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub detail: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedTransactions {
    pub records: Vec<TxRecord>,
    pub self_transfers: usize,
    pub row_errors: Vec<RowError>,
}

impl ParsedTransactions {
    pub fn dropped(&self) -> usize {
        self.self_transfers + self.row_errors.len()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn column_indices<const N: usize>(path: &Path, reader: &mut csv::Reader<File>, names: [&str; N]) -> Result<[usize; N]> {
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            // An entirely empty file has no header row at all.
            if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                return Err(Error::io(path, std::io::Error::other(e.to_string())));
            }
            return Err(Error::Format {
                path: path.into(),
                line: 1,
                detail: e.to_string(),
            });
        }
    };
    let mut out = [0; N];
    for (slot, name) in out.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Schema {
                path: path.into(),
                column: name.to_string(),
            })?;
    }
    Ok(out)
}

/// Reads a `from,to,amount,timestamp` CSV (columns in any order).
///
/// Self-transfers and malformed rows are skipped and reported in the result
/// rather than failing the whole file.
pub fn parse_tx_csv(path: impl AsRef<Path>) -> Result<ParsedTransactions> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let [from_i, to_i, amount_i, ts_i] = column_indices(path, &mut reader, ["from", "to", "amount", "timestamp"])?;

    let mut out = ParsedTransactions::default();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.row_errors.push(RowError {
                    line,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| {
            row.get(i).filter(|s| !s.is_empty()).ok_or_else(|| RowError {
                line,
                detail: format!("missing `{name}`"),
            })
        };
        let parsed = (|| {
            let from = field(from_i, "from")?;
            let to = field(to_i, "to")?;
            let amount: f64 = field(amount_i, "amount")?.parse().map_err(|_| RowError {
                line,
                detail: format!("bad amount `{}`", row.get(amount_i).unwrap_or("")),
            })?;
            let timestamp: i64 = field(ts_i, "timestamp")?.parse().map_err(|_| RowError {
                line,
                detail: format!("bad timestamp `{}`", row.get(ts_i).unwrap_or("")),
            })?;
            if !(amount >= 0.0 && amount.is_finite()) {
                return Err(RowError {
                    line,
                    detail: format!("amount {amount} must be finite and nonnegative"),
                });
            }
            if timestamp <= 0 {
                return Err(RowError {
                    line,
                    detail: format!("timestamp {timestamp} must be positive"),
                });
            }
            Ok(TxRecord::new(from, to, amount, timestamp))
        })();
        match parsed {
            Ok(rec) if rec.from_addr == rec.to_addr => out.self_transfers += 1,
            Ok(rec) => out.records.push(rec),
            Err(e) => out.row_errors.push(e),
        }
    }
    Ok(out)
}

pub fn write_tx_csv(path: impl AsRef<Path>, records: &[TxRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["from", "to", "amount", "timestamp"])
        .map_err(|e| csv_io(path, e))?;
    for r in records {
        w.write_record([
            r.from_addr.as_str(),
            r.to_addr.as_str(),
            &r.amount.to_string(),
            &r.timestamp.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Address with its class label (1 = phishing, 0 = normal for the
/// detection task).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTarget {
    pub address: String,
    pub label: usize,
}

/// Reads an `address,label` CSV of targets.
pub fn parse_targets_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledTarget>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let [addr_i, label_i] = column_indices(path, &mut reader, ["address", "label"])?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |detail: String| Error::Format {
            path: path.into(),
            line,
            detail,
        };
        let address = row
            .get(addr_i)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| bad("missing address".into()))?;
        let label = row
            .get(label_i)
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad(format!("bad label `{}`", row.get(label_i).unwrap_or(""))))?;
        out.push(LabeledTarget {
            address: address.to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn write_targets_csv(path: impl AsRef<Path>, targets: &[LabeledTarget]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["address", "label"]).map_err(|e| csv_io(path, e))?;
    for t in targets {
        w.write_record([t.address.as_str(), &t.label.to_string()])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}
