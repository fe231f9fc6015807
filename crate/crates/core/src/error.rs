use thiserror::Error;

use crate::ode::IntegrationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid symbol {0:?} in operator string")]
    InvalidSymbol(char),

    #[error(transparent)]
    Integration(#[from] IntegrationError),

    #[error("invariant breach at B = {b}: {what} drifted by {drift:e} (limit {limit:e})")]
    InvariantBreach {
        b: f64,
        what: &'static str,
        drift: f64,
        limit: f64,
    },

    #[error("string budget of {budget} exhausted at order k = {k_reached}")]
    StringBudget { budget: usize, k_reached: usize },

    #[error("dense representation limited to {max} sites, got {n}")]
    TooManySites { n: usize, max: usize },

    #[error("series overflowed at k = {k_reached}")]
    Overflow { k_reached: usize },

    #[error("too few nonzero coefficients for a ratio test: {found} (need {needed})")]
    TooFewCoefficients { found: usize, needed: usize },

    #[error("operator is not an eigenoperator: residual {residual:e}")]
    NotEigenoperator { residual: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
