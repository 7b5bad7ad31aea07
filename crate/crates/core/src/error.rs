use thiserror::Error;

/// Errors produced by the recovery library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("capacity exceeded: {what} needs {requested} entries, cap is {cap}")]
    CapacityExceeded {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("model has no null-space vectors below the fit tolerance")]
    NoNullspace,

    #[error("potential function has no zero set in the unit square")]
    NoZeroSet,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
