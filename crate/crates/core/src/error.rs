use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid box: lower[{index}] = {lower} exceeds upper[{index}] = {upper}")]
    InvalidBox {
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("unknown problem `{name}`; available: {available}")]
    UnknownProblem { name: String, available: String },

    #[error(
        "problem `{0}` is defined only through its gradient field; function values are unavailable"
    )]
    GradientOnly(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point is outside the feasible set: {0}")]
    Infeasible(String),

    #[error("non-finite value encountered at iterate {iter}")]
    NonFinite { iter: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures that originate in the numerics rather than in the
    /// caller's input. The CLI maps these to exit status 2.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
