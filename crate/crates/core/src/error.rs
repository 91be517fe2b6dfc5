use std::path::PathBuf;

/// Errors raised by the detection library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid interval ({j}, {k}] for n = {n}: need 0 <= j < k <= n")]
    InvalidInterval { j: usize, k: usize, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample size mismatch: expected n = {expected}, got n = {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
