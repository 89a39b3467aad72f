use thiserror::Error;

/// Failure of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0:#}")]
    Config(anyhow::Error),
    #[error("parse error: {0:#}")]
    Parse(anyhow::Error),
    #[error("model endpoint failure: {0:#}")]
    Model(anyhow::Error),
    #[error("evaluation error: {0:#}")]
    Eval(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Model(_) => 4,
            CliError::Eval(_) => 5,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
