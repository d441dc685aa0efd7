use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size {step} is outside (0, 1/||A||_2) and P_s is not positive definite")]
    StepTooLarge { step: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("MPS parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("projection failed after {iterations} iterations (residual {residual:.3e}, last change {change:.3e})")]
    Projection {
        iterations: usize,
        residual: f64,
        change: f64,
    },

    #[error("system too large for brute-force enumeration ({size} > {limit}); use empirical_sharpness instead")]
    TooLarge { size: usize, limit: usize },

    #[error("all probes are feasible; the ratio is undefined")]
    NoInfeasibleProbe,

    #[error("{0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
