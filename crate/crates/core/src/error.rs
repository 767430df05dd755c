use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// Malformed input file. `line` is 1-based; 0 means the file as a whole.
    #[error("{what}, line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown checkpoint version: {0:?}")]
    UnknownVersion(String),

    #[error("truncated checkpoint: {0}")]
    Truncated(String),

    #[error("checkpoint shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{0}")]
    Insufficient(String),
}

impl Error {
    pub(crate) fn format(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed input data (as opposed to usage or numerics).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Format { .. }
                | Error::UnknownVersion(_)
                | Error::Truncated(_)
                | Error::ShapeMismatch(_)
                | Error::DimensionMismatch { .. }
                | Error::Insufficient(_)
        )
    }
}
