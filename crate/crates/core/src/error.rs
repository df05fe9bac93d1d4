use std::path::PathBuf;

use thiserror::Error;

use crate::data::RowDiagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lambert_w0 is undefined for x = {0} (below -1/e)")]
    LambertDomain(f64),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: mean loss {mean_loss}")]
    Diverged { epoch: usize, mean_loss: f64 },

    #[error("transfer metrics need at least two distributions, got {0}")]
    TooFewDistributions(usize),

    #[error("{path}: header mismatch: {reason}")]
    Header { path: PathBuf, reason: String },

    #[error("{path}: {} malformed row(s), first at row {}: {}", .rows.len(), .rows[0].row, .rows[0].reason)]
    MalformedRows { path: PathBuf, rows: Vec<RowDiagnostic> },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
