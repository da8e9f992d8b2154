use thiserror::Error;

pub type Result<T, E = GemError> = std::result::Result<T, E>;

/// Errors raised by the estimation and analysis routines.
///
/// Component indices are zero-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GemError {
    #[error("invalid covariance for component {component}: {reason}")]
    InvalidCovariance { component: usize, reason: String },

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {reason}")]
    Io { path: String, reason: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("mixture density underflowed to zero at sample {sample}")]
    NumericUnderflow { sample: usize },

    #[error("component {component} is degenerate (responsibility mass {mass:e})")]
    DegenerateComponent { component: usize, mass: f64 },

    #[error("step left the simplex: alpha[{component}] = {value:e} (sum residual {sum_residual:e})")]
    SimplexViolation {
        component: usize,
        value: f64,
        sum_residual: f64,
    },

    #[error("update failed at perturbation {index}: {source}")]
    Perturbed {
        index: usize,
        source: Box<GemError>,
    },

    #[error("step produced a covariance for component {component} that is not positive definite")]
    CovarianceViolation { component: usize },
}

impl GemError {
    /// True for failures of the numerics (as opposed to bad input): degenerate
    /// components, constraint violations produced by a step, and underflow.
    pub fn is_numerical(&self) -> bool {
        if let GemError::Perturbed { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            GemError::NumericUnderflow { .. }
                | GemError::DegenerateComponent { .. }
                | GemError::SimplexViolation { .. }
                | GemError::CovarianceViolation { .. }
        )
    }
}
