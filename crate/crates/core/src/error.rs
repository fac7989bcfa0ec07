use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A required column or feature is absent, or dimensions disagree.
    #[error("schema error: {0}")]
    Schema(String),

    /// Caller misuse: empty inputs, mismatched lengths, bad split sizes.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration values.
    #[error("config error: {0}")]
    Config(String),

    /// An optimizer produced a non-finite loss.
    #[error("diverged: {0}")]
    Diverged(String),

    /// Error attached to a particular row of a batch.
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_row(self, row: usize) -> Self {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
