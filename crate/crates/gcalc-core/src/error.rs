//! Error type shared by every module of the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GcalcError {
    /// Two objects that must live on the same outcome space / grid do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violates a precondition (CFL bound, p < 1, bad sigma0, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A run-level configuration is unusable (domain too narrow, grid escape, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Evaluation outside the stored domain.
    #[error("point outside domain: {0}")]
    OutOfDomain(String),

    /// A numerical procedure failed to meet its own accuracy contract.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("malformed input: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GcalcError>;
