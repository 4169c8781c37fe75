use std::path::PathBuf;

use thiserror::Error;

use crate::embedding::FormatError;
use crate::stats::StatsError;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid json at {path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed embedding file: {0}")]
    Format(#[from] FormatError),

    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("layer {layer} not present in embeddings (available: {available:?})")]
    MissingLayer { layer: u16, available: Vec<u16> },

    #[error("missing scores for {} item(s): {}", .0.len(), .0.join(", "))]
    MissingScores(Vec<String>),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format(FormatError::Io(_)))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
