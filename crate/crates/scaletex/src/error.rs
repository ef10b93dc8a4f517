//! Crate-wide error type.
//!
//! One enum covers all modules so that pipeline code can propagate failures
//! without conversion boilerplate. Variants carry enough context to identify
//! the offending subset/classifier when a deep stage fails.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Derivative order above the supported jet order.
    #[error("unsupported derivative order: order_x={order_x} + order_y={order_y} exceeds {max}")]
    UnsupportedOrder { order_x: u8, order_y: u8, max: u8 },

    /// Mismatched array dimensions between related inputs.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Not enough samples to fit the requested model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A (possibly regularized) class covariance was not positive-definite.
    /// Raising eta/lambda regularization makes the factorization succeed.
    #[error("singular covariance in {context}: factorization failed; consider increasing eta/lambda regularization")]
    SingularCovariance { context: String },

    /// Configuration file or flag values inconsistent with the schema.
    #[error("configuration error: {0}")]
    Config(String),

    /// Image ingestion failure (unsupported format, corrupt file, ...).
    #[error("cannot ingest image {path}: {reason}")]
    Ingestion { path: String, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for `InvalidArgument`.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the error is a singular-covariance failure (the learning-curve
    /// driver maps these to chance-level error instead of aborting).
    pub fn is_singular_covariance(&self) -> bool {
        matches!(self, Error::SingularCovariance { .. })
    }
}
