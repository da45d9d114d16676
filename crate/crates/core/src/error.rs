use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its constraint.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("scatterer sphere collapsed: radius {radius} m at t = {time} s")]
    SphereCollapse { radius: f64, time: f64 },

    #[error("time {time} s is beyond the trajectory horizon {horizon} s")]
    BeyondHorizon { time: f64, horizon: f64 },

    #[error("quadrature did not converge: last estimate {last}, previous {previous}")]
    QuadratureNonConvergence { last: Complex64, previous: Complex64 },

    #[error("zero self-power for channel (rx {rx}, tx {tx})")]
    ZeroSelfPower { rx: usize, tx: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status used by the CLI: 1 for validation problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::QuadratureNonConvergence { .. }
            | Error::ZeroSelfPower { .. }
            | Error::NotHermitian { .. } => 2,
            _ => 1,
        }
    }
}
