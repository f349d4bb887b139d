use std::path::PathBuf;

use thiserror::Error;

use crate::solver::ConvergenceTrace;

pub type Result<T> = std::result::Result<T, DfrcError>;

#[derive(Debug, Error)]
pub enum DfrcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A scalar functional produced NaN or infinity.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The solver hit a non-finite objective. The trace up to that point is kept.
    #[error("solver diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<ConvergenceTrace>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl DfrcError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DfrcError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DfrcError::Io {
            path: path.into(),
            source,
        }
    }
}
