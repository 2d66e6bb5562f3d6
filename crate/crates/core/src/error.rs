use thiserror::Error;

/// Errors produced by rank computations, coefficients, tests and studies.
///
/// Indices carried by variants are 0-based positions in the caller's input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum XiError {
    #[error("tied values at indices {first} and {second} (value {value})")]
    Tie {
        first: usize,
        second: usize,
        value: f64,
    },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("sample size {n} is too small (need at least {min})")]
    Size { n: usize, min: usize },

    #[error("x and y have different lengths ({x_len} vs {y_len})")]
    LengthMismatch { x_len: usize, y_len: usize },

    #[error("neighbor count M={m} is out of range for n={n} (need 1 <= M <= n-1)")]
    MRange { m: usize, n: usize },

    #[error("index {index} is out of range for n={n}")]
    Index { index: usize, n: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rho={0} is outside (-1, 1)")]
    RhoRange(f64),

    #[error("gamma={0} is outside (0, 1)")]
    GammaRange(f64),

    #[error("asymptotic regime violated: M^4 = {m4} exceeds n = {n}")]
    Regime { n: usize, m4: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<XiError>,
    },
}

impl From<std::io::Error> for XiError {
    fn from(e: std::io::Error) -> Self {
        XiError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, XiError>;
