use std::fmt::Display;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn usage(msg: impl Display) -> Self {
        Self::Usage(msg.to_string())
    }

    pub fn config(msg: impl Display) -> Self {
        Self::Config(msg.to_string())
    }

    pub fn data(msg: impl Display) -> Self {
        Self::Data(msg.to_string())
    }

    /// 1 for usage and config problems, 2 for bad data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Data(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
