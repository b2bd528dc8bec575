use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimate {value:e} with achieved error {achieved:e} (requested {requested:e})")]
    QuadratureFailure {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("coefficient {what} is negative or non-positive at x = {location}: value {value}")]
    CoefficientViolation {
        what: &'static str,
        location: f64,
        value: f64,
    },

    #[error("ill-conditioned system (condition estimate {condition:e} above threshold {threshold:e})")]
    IllConditioned { condition: f64, threshold: f64 },

    #[error("observation point lies in the blind-spot set: all usable spectral moments vanish ({0})")]
    BlindSpot(String),

    #[error("series convergence condition violated: {0}")]
    Divergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
