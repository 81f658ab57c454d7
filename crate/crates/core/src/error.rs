use alloc::string::String;

/// Errors reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced a non-finite value or an iterative solve
    /// did not converge. `iterate` names the step or iteration index.
    #[error("numerical failure at iterate {iterate}: {message}")]
    NumericalFailure { iterate: usize, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(iterate: usize, msg: impl Into<String>) -> Self {
        Error::NumericalFailure {
            iterate,
            message: msg.into(),
        }
    }
}
