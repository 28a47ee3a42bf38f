use std::path::PathBuf;

use thiserror::Error;

use crate::molspace::{GraphError, SmilesError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Smiles(#[from] SmilesError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("enumeration up to {requested} carbons exceeds the hard limit of {limit}")]
    EnumerationLimit { requested: usize, limit: usize },

    #[error("invalid carbon range {min}..={max}")]
    InvalidRange { min: usize, max: usize },

    #[error("kernel fixed point did not converge after {iterations} iterations (last update {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
