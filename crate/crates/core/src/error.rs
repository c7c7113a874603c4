use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice basis is singular (|det| = {det:e})")]
    SingularBasis { det: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("truncation radius {needed:.6} exceeds the hard cap {cap:.6}; t is too small for the requested tolerance")]
    RadiusCapExceeded { needed: f64, cap: f64 },

    #[error("quadrature under-resolved for {what}: error estimate {estimate:e} exceeds {tol:e}")]
    UnderResolved {
        what: &'static str,
        estimate: f64,
        tol: f64,
    },

    #[error("{what} did not converge: last increment {last:e} (target {target:e})")]
    NotConverged {
        what: &'static str,
        last: f64,
        target: f64,
    },

    #[error("weight vanishes or is negative at a sample point (value {value:e})")]
    VanishingWeight { value: f64 },

    #[error("metric is singular or not positive-definite (condition estimate {condition:e})")]
    SingularMetric { condition: f64 },

    #[error("engine/symbol mismatch: {0}")]
    EngineMismatch(String),

    #[error("finite differences broke down: noise floor {noise:e} exceeds signal {signal:e}")]
    FiniteDifferenceBreakdown { noise: f64, signal: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

pub(crate) fn require_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
