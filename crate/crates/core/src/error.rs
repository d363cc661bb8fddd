use std::path::PathBuf;

use thiserror::Error;

use crate::refinement::RefineError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("failed to encode {path}: {reason}")]
    Encode { path: PathBuf, reason: String },

    #[error("{path}: expected a 16-bit single-channel PNG, found {found}")]
    SaliencyFormat { path: PathBuf, found: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid dataset index: {0}")]
    Index(String),

    #[error("no valid target: dataset has only {0} entries")]
    NoValidTarget(usize),

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error(transparent)]
    Refine(#[from] RefineError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
