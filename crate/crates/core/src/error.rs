use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("singular value decomposition did not converge")]
    SvdFailed,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PaError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        PaError::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PaError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input or configuration, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PaError::Io { .. } => 3,
            _ => 2,
        }
    }
}
