//! Error type shared across the filter, scenario and evaluation modules.

use thiserror::Error;

/// Errors surfaced by model construction and filter execution.
#[derive(Debug, Error)]
pub enum Error {
    /// Covariance input failed the symmetric positive-definite check.
    #[error("covariance matrix is not symmetric positive-definite")]
    NonSpdCovariance,

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A scalar or structural parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A configuration field failed validation.
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Particle sets must contain at least one particle.
    #[error("particle set must contain at least one particle")]
    EmptyParticleSet,

    /// Weights must be finite, non-negative and not all zero.
    #[error("particle weights must be finite, non-negative and not all zero")]
    InvalidWeights,

    /// Predicted presence possibility is zero, so the predicted spatial
    /// possibility is undefined.
    #[error("predicted presence possibility is zero; spatial prediction undefined")]
    AbsentTarget,

    /// Both branches of the posterior existence normaliser are zero.
    #[error("degenerate normaliser: absence and presence possibilities are both zero")]
    DegenerateNormalizer,

    /// Every particle has zero posterior weight: the likelihood is
    /// incompatible with the entire support.
    #[error("likelihood incompatible with the entire particle support")]
    FilterDivergence,

    /// A measurement lies outside the measurement space.
    #[error("measurement {value} outside the measurement space [{lo}, {hi}]")]
    MeasurementOutOfRange { value: f64, lo: f64, hi: f64 },

    /// Target position coincides with a transmitter or receiver, leaving the
    /// Doppler direction vectors undefined.
    #[error("target position coincides with a transmitter or receiver")]
    DegenerateGeometry,

    /// The scan has zero possibility under the clutter model, so clutter
    /// ratios are undefined.
    #[error("scan has zero possibility under the clutter model")]
    ZeroClutterPossibility,

    /// A possibility function could not be normalised into a density.
    #[error("possibility function is not integrable over the given domain")]
    NotIntegrable,

    /// Transforms of non-Gaussian possibilities are only supported in 1-D.
    #[error("{0}")]
    Unsupported(&'static str),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
