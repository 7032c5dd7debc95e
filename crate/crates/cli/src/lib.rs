//! Scenario runner for the observer library: reads a TOML scenario file,
//! runs it, evaluates the built-in invariants and writes CSV artifacts plus
//! a plain-text summary.

pub mod checks;
pub mod cli;
pub mod config;
pub mod report;
pub mod runner;

use std::io;
use std::path::PathBuf;

use pebo::cuk::ScenarioError;
use pebo::framework::FrameworkError;
use pebo::sim::SimError;

pub use cli::{main_with_args, Cli, Command};
pub use runner::{execute, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config-invalid: {0}")]
    Config(String),
    #[error("integration-diverged: {0}")]
    Diverged(String),
    #[error("io-failure: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("comparison-invalid: {0}")]
    Comparison(String),
    #[error("invariant checks failed: {0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Comparison(_) => 5,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { .. } => CliError::Diverged(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<FrameworkError> for CliError {
    fn from(e: FrameworkError) -> Self {
        match e {
            FrameworkError::EstimateUndefined(_) | FrameworkError::EstimatorDiverged => CliError::Diverged(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Sim(s) => s.into(),
            ScenarioError::Framework(f) => f.into(),
        }
    }
}
