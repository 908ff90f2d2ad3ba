use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("non-finite coordinate {value} on axis {axis}")]
    NonFiniteCoordinate { axis: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point index {index} out of range for configuration of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite field value {value} at point {index}")]
    NonFiniteField { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density {value} exceeds declared bound {bound}")]
    DensityBoundExceeded { value: f64, bound: f64 },

    #[error("quadrature did not converge: relative error {rel_err:e} after refinement")]
    QuadratureNotConverged { rel_err: f64 },

    #[error("gradient undefined at r = {r} (origin or hard core)")]
    SingularGradient { r: f64 },

    #[error("no feasible start configuration after {attempts} attempts")]
    FeasibleStartExhausted { attempts: usize },

    #[error("hard-core rejection persisted after {retries} step halvings")]
    StepRejectionExhausted { retries: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
