//! Configuration, file formats and subcommands for the `chdbc` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod output;

pub use config::RunConfig;

/// Everything a subcommand can fail with, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(chdbc_core::Error),
    #[error("{0}")]
    Staleness(chdbc_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Staleness(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<chdbc_core::Error> for CliError {
    fn from(e: chdbc_core::Error) -> Self {
        match e {
            chdbc_core::Error::Staleness { .. } => CliError::Staleness(e),
            other => CliError::Solver(other),
        }
    }
}
