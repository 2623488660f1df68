use thiserror::Error;

use crate::planners::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("size limit exceeded: {what} needs {needed} entries, cap is {cap}")]
    Size {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("policy evaluation failed: {0}")]
    Evaluation(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("linear program ended with status {status:?}: {detail}")]
    Lp { status: LpStatus, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Config(_) | Error::Json(_))
    }
}
