//! Shared error type for the whole engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Observation point coincides with a source or one of its images.
    #[error("singular evaluation: {0}")]
    Singularity(String),

    /// A configuration value violates a named constraint.
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input text (scenario file, coefficient table, ...).
    #[error("parse error: {0}")]
    Parse(String),

    /// Requested computation would exceed a hard resource cap.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver failed to meet its tolerance within its cap.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Two containers that must be congruent are not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
