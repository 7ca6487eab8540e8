//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Not enough data to fit or estimate (e.g. fewer than 10 excesses).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An iterative procedure failed to converge; carries the last iterate.
    #[error("no convergence: {message}")]
    NoConvergence { message: String, last: Vec<f64> },

    /// Argument or parameter outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A likelihood or density evaluation produced a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Simulation exceeded its spectral-point budget before the stopping
    /// rule triggered.
    #[error("simulation budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Some jackknife replicates failed; carries the failed block labels.
    #[error("jackknife incomplete, failed blocks {failed:?}: {message}")]
    JackknifeIncomplete { failed: Vec<i64>, message: String },

    /// Malformed input file, with 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }
}
