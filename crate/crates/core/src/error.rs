use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("signal too short: need at least {min} samples, got {got}")]
    TooShort { min: usize, got: usize },

    /// A matrix that must be inverted (FIM, steering Gram) is numerically singular.
    #[error("ill-conditioned {what}: condition number {condition:.3e} exceeds {limit:.1e}")]
    IllConditioned {
        what: &'static str,
        condition: f64,
        limit: f64,
    },

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("bin {bin} is not a local maximum of the windowed periodogram")]
    NotAPeak { bin: i64 },

    #[error("degenerate eigenstructure: {0}")]
    Degenerate(String),

    #[error("too few bins for noise floor estimate: need {min}, got {got}")]
    TooFewBins { min: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. } | Error::Degenerate(_) | Error::NotAPeak { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
