use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid sampling: {0}")]
    InvalidSampling(String),

    #[error("degenerate draw after {attempts} attempts: {reason}")]
    DegenerateDraw { attempts: usize, reason: String },

    #[error("unsupported by oracle: {0}")]
    Unsupported(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("cell (rate_zero={rate_zero}, rate_nonzero={rate_nonzero}): {source}")]
    Cell {
        rate_zero: f64,
        rate_nonzero: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
