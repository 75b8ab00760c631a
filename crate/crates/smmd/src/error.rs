//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by estimators, transforms, and the Monte-Carlo machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("kernel width gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),

    #[error("kernel scale must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error("sample must contain at least one point")]
    EmptySample,

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("unbiased estimator requires n >= 2, got n = {0}")]
    SampleTooSmall(usize),

    #[error("samples must have equal size, got n = {q} and n = {p}")]
    UnequalSampleSizes { q: usize, p: usize },

    #[error("standard deviations must be nonnegative and finite (row {row}, column {col})")]
    InvalidSd { row: usize, col: usize },

    #[error("column {0} has zero sample variance")]
    ZeroVariance(usize),

    #[error("whitening requires n >= d + 1, got n = {n}, d = {d}")]
    TooFewPointsForWhitening { n: usize, d: usize },

    #[error("sample covariance is near-singular (smallest/largest eigenvalue = {cond:.3e})")]
    SingularCovariance { cond: f64 },

    #[error("point index {index} out of range for sample of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("momentum must lie strictly inside (0, 1), got {0}")]
    InvalidMomentum(f64),

    #[error("interval requires at least one batch")]
    NoBatches,

    #[error("replicates must be at least {min}, got {got}")]
    TooFewReplicates { min: usize, got: usize },

    #[error("null distribution required {need}, cached distribution has {have}")]
    SpecMismatch { need: String, have: String },

    #[error("the standardized statistic is defined for the RBF kernel only")]
    UnsupportedKernel,

    #[error("too many whitening redraws: {redraws} across {replicates} replicates")]
    TooManyRedraws { redraws: usize, replicates: usize },

    #[error("external sample has {rows} rows, need at least n = {n}")]
    NotEnoughRows { rows: usize, n: usize },

    #[error("unknown method {0:?}; expected analytic_rbf, empirical_rbf, or empirical_imq")]
    UnknownMethod(String),

    #[error("cache file corrupt: {0}")]
    CorruptCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
