use std::path::PathBuf;

use thiserror::Error;

use crate::spectral::SpectralField;

pub type Result<T, E = CglError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CglError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("fourier support exceeds truncation {truncation}: offending wavevector ({k1}, {k2}, {k3})")]
    SupportExceedsTruncation {
        truncation: i32,
        k1: i32,
        k2: i32,
        k3: i32,
    },

    #[error("non-finite values encountered ({context})")]
    NonFinite { context: String },

    /// Carries the last finite state so callers can dump it.
    #[error("solution blew up at t = {time}")]
    BlowUp {
        time: f64,
        last_finite: Box<SpectralField>,
    },

    #[error("bound violated: computed {computed:.6e} exceeds {bound:.6e} beyond tolerance")]
    BoundViolation { computed: f64, bound: f64 },

    #[error("averaging regime violated: |beta|/(2 omega_n) = {ratio:.4} >= 1")]
    AveragingRegime { ratio: f64 },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CglError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CglError::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            CglError::InvalidArgument(_) => "invalid_argument",
            CglError::SizeMismatch { .. } => "size_mismatch",
            CglError::SupportExceedsTruncation { .. } => "support_exceeds_truncation",
            CglError::NonFinite { .. } => "non_finite",
            CglError::BlowUp { .. } => "blow_up",
            CglError::BoundViolation { .. } => "bound_violation",
            CglError::AveragingRegime { .. } => "averaging_regime",
            CglError::Format { .. } => "format",
            CglError::Config(_) => "config",
            CglError::Io(_) => "io",
            CglError::Json(_) => "json",
        }
    }
}
