use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NonFinite(String),

    #[error("every run failed: {0}")]
    AllRunsFailed(String),

    #[error("no closed-form CMI for model `{0}`")]
    NoClosedForm(String),

    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),

    #[error("no usable rows in {path} ({dropped} dropped)")]
    NoUsableRows { path: PathBuf, dropped: usize },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error on {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }

    /// True for errors caused by the input data rather than configuration or numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::MissingColumn(_)
                | Error::NoUsableRows { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Io { .. }
                | Error::Dimension(_)
        )
    }

    /// True for diverged training or other non-finite arithmetic.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::AllRunsFailed(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
