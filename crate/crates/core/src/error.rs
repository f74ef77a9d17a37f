use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}: {message}")]
    Row { path: String, row: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("transcoder unavailable: {0}")]
    Transcoder(String),

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input rather than internal faults.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Row { .. } | Error::Invalid(_) | Error::Shape(_) | Error::Missing(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
