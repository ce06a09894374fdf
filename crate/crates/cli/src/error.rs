use thiserror::Error;

/// Exit status contract: 0 success, 1 usage, 2 data, 3 environment.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Env(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Env(_) => 3,
        }
    }
}

impl From<gaitlab_eval::EvalError> for CliError {
    fn from(e: gaitlab_eval::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
