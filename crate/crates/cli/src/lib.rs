//! Command-line driver: configuration, experiment runs, trace output and verification.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;
pub mod verify;

use std::path::PathBuf;

pub use config::{ConfigError, Environment, ExperimentConfig};
pub use run::{run, RunOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("invalid experiment: {0}")]
    Experiment(#[from] phi_regret::Error),
    #[error("{path}: line {line}: {message}")]
    Trace {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Experiment(_) | CliError::Trace { .. } => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Pool(_) => EXIT_IO,
        }
    }
}
