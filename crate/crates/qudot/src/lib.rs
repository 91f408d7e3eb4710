//! Scenario-driven front end for `qudot-core`.
//!
//! Each subcommand reads one JSON scenario, computes its results in memory
//! and only then writes them, together with a [`manifest::RunManifest`],
//! into the output directory. A run that fails writes nothing.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

use thiserror::Error;

pub use commands::{run, Outcome, RunOptions, Subcommand};
pub use config::ScenarioConfig;
pub use manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("compile error: {0}")]
    Compile(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compile(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Exit status of a run whose artifacts were written but whose gate missed
/// its fidelity tolerance.
pub const EXIT_TOLERANCE: u8 = 4;
