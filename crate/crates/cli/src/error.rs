use std::path::Path;
use std::process::ExitCode;

use ammfeelab_core::Error as CoreError;

/// Failure of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io(_) => 4,
            CliError::Other(_) => 1,
        })
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("I/O error on {}: {err}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let text = err.to_string();
        match err {
            CoreError::Config { .. } | CoreError::InvalidArgument(_) => CliError::Config(text),
            CoreError::Data { .. } => CliError::Data(text),
            CoreError::Io { .. } => CliError::Io(text),
            CoreError::Numeric(_) => CliError::Other(text),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
