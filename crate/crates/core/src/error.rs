use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point depth {z} is at or behind the camera plane")]
    NonPositiveDepth { z: f64 },
    #[error("radius {sigma} must be positive")]
    NonPositiveRadius { sigma: f64 },
    #[error("covariance is singular or not positive definite")]
    SingularCovariance,
    #[error("expected a vector of length {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("loss evaluated to a non-finite value")]
    NonFiniteLoss,
    #[error("gradient contains a non-finite entry at index {index}")]
    NonFiniteGradient { index: usize },
    #[error("ground truth is required but missing")]
    MissingGroundTruth,
    #[error("frame {frame} has only {count} correspondences (need at least 8)")]
    DegenerateScene { frame: usize, count: usize },
    #[error("no correspondence survived sampling")]
    EmptyAfterSampling,
    #[error("{what} = {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss | Error::NonFiniteGradient { .. } | Error::SingularCovariance
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
