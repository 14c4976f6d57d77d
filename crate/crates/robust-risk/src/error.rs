//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by distribution construction, measure evaluation and the
/// worst-case machinery.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum RiskError {
    /// A distribution needs at least one sample.
    #[error("empty sample: a distribution needs at least one value")]
    EmptySample,

    /// NaN or infinite values cannot enter a distribution.
    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },

    /// A parameter left its admissible range.
    #[error("{name} must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    /// Wasserstein distance is only defined here for equal atom counts.
    #[error("unequal support size: {left} vs {right} atoms")]
    UnequalSupportSize { left: usize, right: usize },

    /// The tail level is too fine for the sample: the tail density 1/alpha
    /// is not representable on n atoms when alpha * n < 1.
    #[error("alpha = {alpha} too small for sample size {n}: alpha * n must be >= 1")]
    AlphaTooSmallForSample { alpha: f64, n: usize },

    /// A step density on [0,1] failed validation.
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    /// The requested operation is not defined for this measure.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A closed form is only valid on part of the parameter space.
    #[error("outside validity domain: {0}")]
    ValidityDomain(String),

    /// A weight vector is not a probability density on the sample atoms.
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    /// Reading input data failed.
    #[error("input error: {0}")]
    Input(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, RiskError>;
