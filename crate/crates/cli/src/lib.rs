//! Command implementations behind the `clfq` binary.
//!
//! Every command is a plain function over a resolved [`config::RunConfig`],
//! so tests drive the same code paths as the binary.

pub mod commands;
pub mod config;
pub mod demo;
pub mod plot;
pub mod selfmatch;

use std::fmt;

/// Outcome of a command that did not fully succeed.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; nothing was run. Exit code 2.
    Usage(anyhow::Error),
    /// Some items failed, the rest were written. Exit code 1.
    Partial { failed: Vec<String> },
    /// The command stopped. Exit code 1.
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Partial { .. } | CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "invalid usage: {e:#}"),
            CliError::Partial { failed } => {
                write!(f, "{} item(s) failed: {}", failed.len(), failed.join(", "))
            }
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<clfq::Error> for CliError {
    fn from(e: clfq::Error) -> Self {
        CliError::Failed(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Encoding of tabular command outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}
