//! Configuration-driven driver: `train`, `verify`, `sweep`.

pub mod config;
pub mod run;
pub mod verify;

use std::fmt;

/// Failure classes, each mapped to a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    /// A property suite reported a failing check.
    Property(String),
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Property(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Property(m) | CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            CliError::Property(_) => "property check failed",
            CliError::Config(_) => "config error",
            CliError::Numeric(_) => "numerical failure",
            CliError::Io(_) => "i/o error",
        };
        write!(f, "{kind}: {}", self.message())
    }
}

impl std::error::Error for CliError {}
