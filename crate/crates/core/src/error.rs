use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("degenerate degree: row {row} of the adjacency sums to {sum}")]
    DegenerateDegree { row: usize, sum: f64 },

    #[error("numerical failure at {location}")]
    Numerical { location: String },

    #[error("training diverged at epoch {epoch}, graph {graph}: loss {loss}")]
    Diverged { epoch: usize, graph: usize, loss: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: missing column `{column}`", path.display())]
    Schema { path: PathBuf, column: String },

    #[error("{}:{line}: {detail}", path.display())]
    Format { path: PathBuf, line: usize, detail: String },

    #[error("unknown address {0}")]
    UnknownAddress(String),

    #[error("malformed json in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
