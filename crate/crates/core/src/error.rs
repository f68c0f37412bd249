use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// Structurally invalid request (bad index, missing stored factors, unknown mode).
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{what} covariance is not positive definite (jitter tried up to {jitter:e})")]
    NotPositiveDefinite { what: &'static str, jitter: f64 },

    #[error("design matrix is numerically singular (condition number {condition_number:.3e})")]
    SingularDesign { condition_number: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// A stored file does not have the expected layout.
    #[error("{file}: {msg}")]
    Format { file: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub(crate) fn format_err(file: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Format { file: file.into(), msg: msg.into() }
}

pub(crate) fn check_dims(
    context: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        })
    }
}
