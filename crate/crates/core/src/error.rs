use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("{0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution is not converged (residual {residual:e} > tolerance {tolerance:e})")]
    Unconverged { residual: f64, tolerance: f64 },

    #[error("effective profile is not doubly regular")]
    NotDoublyRegular,

    #[error("net-rate derivative is not decreasing near tau = {tau}: {detail}")]
    ConcavityViolation { tau: f64, detail: String },

    #[error("{rejected} of {total} Monte Carlo samples rejected")]
    TooManyRejections { rejected: usize, total: usize },
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Unconverged { .. }
                | Error::ConcavityViolation { .. }
                | Error::TooManyRejections { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
