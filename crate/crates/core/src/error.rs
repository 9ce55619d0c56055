use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A chain longer than the measure can support was requested.
    #[error("chain length {requested} exceeds the numerically supportable length {max_stable}")]
    ChainTooLong { requested: usize, max_stable: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::ChainTooLong { .. } => 2,
            Error::NumericalFailure(_) => 3,
            Error::FitRefused(_) | Error::Io(_) => 1,
        }
    }
}
