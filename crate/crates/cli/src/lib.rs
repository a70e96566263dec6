//! Batch front end: JSON configurations in, reports and CSV plot data out.

pub mod config;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::RunConfig;
pub use run::{execute, run_job, run_single, run_suite, JobOutcome};

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] driftlab_core::Error),
}

impl CliError {
    /// 3 for invalid configurations, 4 for I/O, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use driftlab_core::Error as E;
        match self {
            CliError::Config(_) => run::EXIT_CONFIG,
            CliError::Io { .. } => run::EXIT_IO,
            CliError::Core(E::Io(_)) => run::EXIT_IO,
            CliError::Core(E::Config(_) | E::Contract(_) | E::EmptySubdomain { .. }) => run::EXIT_CONFIG,
            CliError::Core(E::Diverged { .. } | E::SingularMatrix { .. }) => 1,
        }
    }
}
