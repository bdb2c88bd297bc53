use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the declared domain of an objective.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid argument to an operation.
    #[error("argument error: {0}")]
    Argument(String),

    /// Malformed data (non-finite targets, mismatched lengths).
    #[error("data error: {0}")]
    Data(String),

    /// A variable index was never queried, so its score is undefined.
    #[error("coverage error: variable index {0} has zero query count")]
    Coverage(usize),

    /// An operation needs state that is not available yet.
    #[error("state error: {0}")]
    State(String),

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Problem size exceeds a hard resource cap.
    #[error("resource error: {0}")]
    Resource(String),

    /// Numerical failure (e.g. Cholesky on a non-PD matrix).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
