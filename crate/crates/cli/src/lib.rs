//! Scenario runner for the loose-source decoy-state analysis.
//!
//! Every command is a pure function from a [`ScenarioConfig`] (plus flags) to
//! text; `main` only does argument parsing and I/O.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use config::ScenarioConfig;
pub use error::CliError;
