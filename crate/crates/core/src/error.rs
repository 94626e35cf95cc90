use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("phase bin {bin} of mode {mode} is empty")]
    EmptyBin { mode: char, bin: usize },

    #[error("phase bin pair ({a}, {b}) holds no records")]
    EmptyBinPair { a: usize, b: usize },

    #[error("quadrature convention mismatch: dataset uses `{dataset}`, table uses `{table}`")]
    ConventionMismatch { dataset: String, table: String },

    #[error("numerical tolerance exceeded: {0}")]
    Tolerance(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit code conventionally associated with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::EmptyBin { .. }
            | Error::EmptyBinPair { .. }
            | Error::ConventionMismatch { .. } => 2,
            Error::Io(_) | Error::Format { .. } | Error::Json(_) => 3,
            Error::Tolerance(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
