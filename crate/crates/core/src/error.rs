use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("i/o error on {path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Wrong magic bytes or an unknown tag in a binary container.
    #[error("format error: {0}")]
    Format(String),

    /// Payload shorter than its header promises, or trailing garbage.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("sinkhorn did not converge: {0}")]
    Convergence(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io_at(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoAt {
            path: path.into(),
            source,
        }
    }
}
