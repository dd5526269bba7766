use thiserror::Error;

use crate::linsolve::SolveReport;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mesh structure error: {0}")]
    Structure(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: zero pivot at index {pivot}")]
    Singular { pivot: usize },

    #[error("linear solver did not converge: {report}")]
    NotConverged { report: SolveReport },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
