use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("association failed: only {matched} matched samples (need at least 2)")]
    Association { matched: usize },

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("empty error set at window {window}")]
    EmptyWindow { window: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
