use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum FptError {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters violate a structural invariant; the invariant is named.
    #[error("invalid parameters: {invariant} violated ({detail})")]
    InvalidParams {
        invariant: &'static str,
        detail: String,
    },

    /// An infinite series did not reach its stopping criterion within the term cap.
    #[error("{series} did not converge after {terms} terms (tail estimate {tail:e})")]
    Truncation {
        series: &'static str,
        terms: usize,
        tail: f64,
    },

    /// A result does not fit in double precision.
    #[error("overflow evaluating {0}")]
    Overflow(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FptError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FptError::Domain(msg.into())
    }

    /// True for failures of the numerical engine rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, FptError::Truncation { .. } | FptError::Overflow(_))
    }
}

pub type Result<T> = std::result::Result<T, FptError>;
