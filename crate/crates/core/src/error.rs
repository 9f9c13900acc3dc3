use thiserror::Error;

/// Errors raised by the accountant, calibration and mechanism code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root finder was handed an interval without a sign change.
    #[error("bracket error: no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// An iterative method ran out of iterations.
    #[error("no convergence after {iterations} iterations: {context}")]
    Convergence { iterations: usize, context: String },

    /// An input is too large for an exhaustive or exponential-cost routine.
    #[error("size error: {what} is {got}, limit is {limit}")]
    Size { what: &'static str, got: usize, limit: usize },

    /// An accountant operation was invoked in the wrong phase.
    #[error("state error: {0}")]
    State(String),

    /// A consumption request does not match any remaining registered parameter.
    #[error("budget error: {0}")]
    Budget(String),

    /// A privacy class was routed to a conversion that does not accept it.
    #[error("contract error: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
