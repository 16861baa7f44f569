use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("matrix is not symmetric (residual {residual:e})")]
    NotSymmetric { residual: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("endomorphism is not self-adjoint (residual {residual:e})")]
    NotSelfAdjoint { residual: f64 },

    #[error("endomorphism is not skew-adjoint (residual {residual:e})")]
    NotSkewAdjoint { residual: f64 },

    #[error("not a Hermitian almost complex structure: {reason} (residual {residual:e})")]
    NotHermitian { reason: &'static str, residual: f64 },

    #[error("tensor is not expressed in an orthonormal frame")]
    NotOrthonormalFrame,

    #[error("direction is not a unit vector (|x| = {norm})")]
    NotUnit { norm: f64 },

    #[error("tensor violates curvature symmetries (residual {residual:e})")]
    SymmetryViolation { residual: f64 },

    #[error("point {point:?} is outside the usable chart domain: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("reconstruction failed (residual {residual:e})")]
    ReconstructionFailed { residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
