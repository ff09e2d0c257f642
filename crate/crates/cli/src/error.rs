use std::process::ExitCode;

use kerr_tfd::{ConfigError, FockError, OracleError, PropagateError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{failed} validation check(s) failed")]
    Validation { failed: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<FockError> for CliError {
    fn from(e: FockError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PropagateError> for CliError {
    fn from(e: PropagateError) -> Self {
        match e {
            PropagateError::ModeMismatch { .. }
            | PropagateError::NotSingleMode(_)
            | PropagateError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::DenseTooLarge { .. }
            | OracleError::Config(_)
            | OracleError::InvalidStep => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}
