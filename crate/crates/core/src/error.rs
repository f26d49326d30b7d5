use thiserror::Error;

/// Errors raised by the extraction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LcsError {
    #[error("time {t} outside forcing coverage [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("tensor is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("tensor is singular")]
    Singular,

    #[error("degenerate eigen-frame: eigenvalues are not pairwise distinct")]
    DegenerateFrame,

    #[error("degenerate point at ({x}, {y}): {reason}")]
    DegeneratePoint {
        x: f64,
        y: f64,
        reason: &'static str,
    },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LcsError {
    fn from(e: std::io::Error) -> Self {
        LcsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LcsError>;
