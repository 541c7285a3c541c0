use thiserror::Error;

/// Errors produced anywhere in the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("k-space coordinate out of [-0.5, 0.5) at sample {index}: ({kx}, {ky})")]
    Domain { index: usize, kx: f64, ky: f64 },

    #[error("k-space coordinate out of [-0.5, 0.5) on line {line}: ({kx}, {ky})")]
    DomainLine { line: usize, kx: f64, ky: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("density compensation singular at sample {index}: |A d| = {value:e}")]
    Singular { index: usize, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },

    #[error("gradient tape already consumed")]
    TapeConsumed,

    #[error("image {height}x{width} too small: {reason}")]
    TooSmall {
        height: usize,
        width: usize,
        reason: String,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
