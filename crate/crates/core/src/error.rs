//! Crate-wide error type.

use std::path::PathBuf;

use crate::model::JointVector;

/// Everything that can go wrong while loading models, simulating trials or
/// computing corrections.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad input: shape mismatch, unknown key, broken invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A joint value fell outside its limits.
    #[error("joint `{joint}` at {value} rad is outside [{lower}, {upper}]")]
    JointRange {
        joint: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    /// Two consecutive via-points of a muscle coincide after forward kinematics.
    #[error("degenerate routing for muscle `{muscle}` between via-points {segment} and {}", segment + 1)]
    DegenerateRouting { muscle: String, segment: usize },

    /// NaN or infinity appeared in a simulation or solver state.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The joint-angle estimator diverged. Carries the best iterate found.
    #[error("joint estimation diverged (best residual {residual:.3e} m)")]
    EstimationFailure { best: JointVector, residual: f64 },

    /// The masked task Jacobian has no usable direction.
    #[error("singular correction: {0}")]
    SingularCorrection(String),

    /// Camera geometry cannot produce a point (parallel rays, no observations).
    #[error("degenerate perception geometry: {0}")]
    DegenerateGeometry(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::JointRange { .. }
            | Error::DegenerateRouting { .. }
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::Csv(_) => 2,
            Error::Numeric(_) | Error::EstimationFailure { .. } | Error::SingularCorrection(_) => 3,
            Error::DegenerateGeometry(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
