use std::path::PathBuf;

use crate::solvers::IterationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {quantity}{}", iteration.map(|k| format!(" at iteration {k}")).unwrap_or_default())]
    NonFinite {
        quantity: &'static str,
        iteration: Option<usize>,
    },

    #[error("{solver} diverged at iteration {}: f = {}", record.k, record.f_y)]
    Diverged {
        solver: String,
        record: Box<IterationRecord>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("reference computation failed: {0}")]
    Reference(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attaches an iteration index to evaluation errors that lack one.
    pub(crate) fn at_iteration(self, k: usize) -> Self {
        match self {
            Error::NonFinite {
                quantity,
                iteration: None,
            } => Error::NonFinite {
                quantity,
                iteration: Some(k),
            },
            other => other,
        }
    }
}
