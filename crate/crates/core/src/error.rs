use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid policy: control {control} not admissible at state {state}")]
    InvalidPolicy { state: usize, control: usize },
    #[error("model evaluation produced a non-finite value at state {state}")]
    NonFinite { state: usize },
    #[error("empty control set at state {0}")]
    EmptyControlSet(usize),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("series truncation did not reach tolerance after {terms} terms")]
    Truncation { terms: usize },
    #[error("linear solve is ill-conditioned (residual {residual:e})")]
    Conditioning { residual: f64 },
    #[error("invariant violated at iteration {iteration}: {what}")]
    InvariantViolation { iteration: usize, what: String },
    #[error("least-squares fit failed: {0}")]
    Fit(String),
    #[error("feedback linearization singular: cos(z) = {cos_z:e}")]
    Singular { cos_z: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
