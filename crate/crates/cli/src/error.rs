use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric contract violation: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

/// Library errors raised while validating inputs.
pub fn config(e: eqm_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Library errors raised while computing.
pub fn numeric(e: eqm_core::Error) -> CliError {
    CliError::Numeric(e.to_string())
}
