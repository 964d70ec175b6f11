//! Experiment harness for the moving-mesh PME solver: configuration,
//! experiment drivers, snapshot/CSV/JSON artifacts.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod snapshot;

use std::fmt;

#[derive(Debug)]
pub enum HarnessError {
    Config(config::ConfigError),
    Io(String),
    Run(String),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "{e}"),
            HarnessError::Io(msg) => write!(f, "io: {msg}"),
            HarnessError::Run(msg) => write!(f, "run: {msg}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<config::ConfigError> for HarnessError {
    fn from(e: config::ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl HarnessError {
    /// Process exit status: configuration problems exit with 2, runtime
    /// failures with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}
