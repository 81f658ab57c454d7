use std::path::{Path, PathBuf};

/// Failures of a command, grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or unusable input files.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure at iterate {iterate}: {message}")]
    Numerical { iterate: usize, message: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

impl From<ac_action::Error> for CliError {
    fn from(e: ac_action::Error) -> Self {
        match e {
            ac_action::Error::InvalidArgument(msg) => CliError::Config(msg),
            ac_action::Error::NumericalFailure { iterate, message } => CliError::Numerical { iterate, message },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv output: {e}"))
    }
}
