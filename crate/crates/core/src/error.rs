use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A weighted norm did not stabilise under quadrature refinement.
    #[error("integrability error: {what} (relative change {relative_change:.3e})")]
    Integrability { what: String, relative_change: f64 },

    #[error("degenerate generator set: {0}")]
    Degenerate(String),

    #[error("numerical blowup at step {step} (t = {time}): |S| = {value:.3e} exceeds guard {guard:.3e}")]
    NumericalBlowup {
        step: usize,
        time: f64,
        value: f64,
        guard: f64,
    },

    #[error("specification mismatch: {0}")]
    SpecMismatch(String),

    #[error("regression failed: {0}")]
    Regression(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
