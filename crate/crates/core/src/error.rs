use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the workbench can report, grouped by the component that
/// detected it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("design error: {0}")]
    Design(String),
    #[error("matrix error: {0}")]
    Matrix(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("comparison error: {0}")]
    Comparison(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("lookup error: unit {0} not found")]
    Lookup(u64),
    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{failed} of {total} replicates failed (limit 1%)")]
    ExcessFailures { failed: usize, total: usize },
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn design(msg: impl Into<String>) -> Self {
        Error::Design(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration rather than by a
    /// run going wrong.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Design(_) | Error::Matrix(_) => true,
            Error::Replicate { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
