//! Error type shared by all toolkit operations.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (left {left}, right {right})")]
    DimensionMismatch {
        context: String,
        left: usize,
        right: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("no admissible gain: certified constant delta = {delta} is not positive")]
    NoAdmissibleGain { delta: f64 },

    #[error("infeasible gain constraint: admissible upper bound {lambda_max} is not positive")]
    InfeasibleConstraint { lambda_max: f64 },

    #[error("matrix exponential overflow: t*||M|| = {scale:.3e}; rescale time or the operator")]
    ExpOverflow { scale: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("trajectory diverged at t = {t}: |z| = {norm:.3e} exceeds {limit:.3e}")]
    Divergence { t: f64, norm: f64, limit: f64 },

    #[error("operator evaluation failed at sample {point}: {reason}")]
    Evaluation { point: String, reason: String },

    #[error("unknown gallery model '{id}'; valid ids: {valid}")]
    UnknownModel { id: String, valid: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
