//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by approximation, linear algebra, estimation and inference.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Adaptive approximation reached the maximum grid without coefficient
    /// decay. The input is non-smooth, singular or under-resolved.
    #[error("function not resolved at maximum grid ({max_points} points): {context}")]
    NonResolved { max_points: usize, context: String },

    /// An evaluation point lies outside the domain beyond the clamping window.
    #[error("point {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    /// Two function-valued operands live on different intervals.
    #[error("domain mismatch: [{lo_a}, {hi_a}] vs [{lo_b}, {hi_b}]")]
    DomainMismatch {
        lo_a: f64,
        hi_a: f64,
        lo_b: f64,
        hi_b: f64,
    },

    /// An operand list was empty where at least one element is required.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Matrix/quasimatrix dimensions do not line up.
    #[error("shape mismatch: {context} ({got} vs {expected})")]
    ShapeMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    /// All singular values are below the absolute floor; no pseudoinverse.
    #[error("zero matrix: every singular value is below {floor:e}")]
    ZeroMatrix { floor: f64 },

    /// Invalid argument (interval bounds, tolerances, counts, probabilities).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cross-validation cannot distinguish bandwidths on constant data.
    #[error("degenerate data: all samples identical")]
    DegenerateData,

    /// A training sequence is too short to produce any observation triple.
    #[error("sequence {index} has length {len}, need at least 3")]
    TooShort { index: usize, len: usize },

    /// The m-th singular value is numerically zero relative to the largest:
    /// the rank-m assumption fails empirically.
    #[error("rank deficient: sigma_{k} = {sigma:e} below {threshold:e}")]
    RankDeficient { k: usize, sigma: f64, threshold: f64 },

    /// State-update normalizer underflowed; the observed sequence has
    /// essentially zero probability under the model.
    #[error("degenerate state at t = {t}: normalizer {denom:e} underflowed")]
    DegenerateState { t: usize, denom: f64 },

    /// The conditioning history has log-density below the representable range.
    #[error("history has vanishing probability (log-density {log_density})")]
    ZeroProbabilityHistory { log_density: f64 },

    /// Randomized model construction failed every retry.
    #[error("model construction failed after {attempts} attempts: {context}")]
    ConstructionFailed { attempts: usize, context: String },

    /// Serialization or deserialization failure.
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain_mismatch(a: crate::cheb::Interval, b: crate::cheb::Interval) -> Self {
        Error::DomainMismatch {
            lo_a: a.lo(),
            hi_a: a.hi(),
            lo_b: b.lo(),
            hi_b: b.hi(),
        }
    }
}
