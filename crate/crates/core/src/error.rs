use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("norming functional undefined at origin")]
    ZeroNormingFunctional,

    #[error("combinatorial budget exceeded: {count} candidates > {budget}; {hint}")]
    BudgetExceeded {
        count: u128,
        budget: u128,
        hint: &'static str,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
