use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite potential value at orbit index {index}")]
    NonFinite { index: i64 },

    #[error("step count {requested} exceeds cap {cap}")]
    StepCap { requested: u64, cap: u64 },

    #[error("lattice enumeration too large: {0} points")]
    LatticeOverflow(f64),

    #[error("taylor degree {needed} exceeds cap {cap}")]
    DegreeCap { needed: usize, cap: usize },

    #[error("coefficients are not hermitian: mode {0:?}")]
    NotHermitian(Vec<i32>),

    #[error("window cap {cap} exceeded at leak {leak:.3e}; transport looks ballistic, raise the cap or shorten T")]
    WindowCap { cap: usize, leak: f64 },

    #[error("profile is invalid: leaked mass {leak:.3e} above tolerance {tol:.3e}")]
    InvalidProfile { leak: f64, tol: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("eigensolver did not converge for index {0}")]
    NoConvergence(usize),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// True for errors that stem from a numerical policy (window caps and
    /// similar) rather than from bad input.
    pub fn is_numeric_policy(&self) -> bool {
        matches!(
            self,
            Error::WindowCap { .. }
                | Error::InvalidProfile { .. }
                | Error::StepCap { .. }
                | Error::DegreeCap { .. }
                | Error::NoConvergence(_)
                | Error::LatticeOverflow(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
