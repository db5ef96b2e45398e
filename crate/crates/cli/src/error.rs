use std::process::ExitCode;

use puk_service::ServiceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        })
    }
}

impl From<puk_core::Error> for CliError {
    fn from(e: puk_core::Error) -> Self {
        match e {
            puk_core::Error::UnknownName { .. } => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::BadRequest(m) => CliError::Usage(m),
            ServiceError::Core(c) => c.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
