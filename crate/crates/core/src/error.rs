use thiserror::Error;

/// Errors raised by the quadrature, stepping, oracle and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid order alpha = {0}: must be positive and not an integer")]
    InvalidOrder(f64),

    #[error("invalid step size h = {0}: must be positive and finite")]
    InvalidStep(f64),

    #[error("derivative data returned non-finite value {value} at t = {t}")]
    Evaluation { t: f64, value: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("Newton iteration for Laguerre node {index} of K = {order} did not converge")]
    NodeConvergence { index: usize, order: usize },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("insufficient data: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
