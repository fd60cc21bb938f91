use thiserror::Error;

/// Errors raised by the solver and its diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample outside the space-time domain: X = ({x1}, {x2}), t = {t}")]
    Domain { x1: f64, x2: f64, t: f64 },

    #[error("degenerate chart at X = ({x1}, {x2}), t = {t}: metric determinant {det}")]
    DegenerateChart { x1: f64, x2: f64, t: f64, det: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("linear solve stalled after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("Picard iteration diverged after {iterations} corrections (last contraction ratio {ratio}); check the smallness report")]
    Divergence { iterations: usize, ratio: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
