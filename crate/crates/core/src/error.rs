use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the diagnosis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fft length must be power of two (got {0})")]
    FftLength(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty time-frequency content")]
    EmptyContent,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
