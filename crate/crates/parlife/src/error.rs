//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by the valuation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of the requested function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates a structural invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Adaptive quadrature exhausted its evaluation budget.
    #[error("quadrature did not converge: estimate {estimate}, error {abs_error}")]
    Quadrature { estimate: f64, abs_error: f64 },

    /// The smooth-pasting residual behaved in a way the theory rules out.
    #[error("barrier solver: {0}")]
    Solver(String),

    /// An implicit derivative has a vanishing denominator.
    #[error("degenerate derivative: {0}")]
    Degenerate(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
