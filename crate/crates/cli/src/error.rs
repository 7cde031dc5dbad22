//! CLI error taxonomy mapped onto the stable exit-code contract:
//! 0 success, 2 config error, 3 numerical failure, 4 tolerance failure.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("tolerance failure: {0}")]
    Tolerance(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
