//! File formats, run configuration and command plumbing around
//! [`hamreg_core`]: dataset CSV, checkpoint JSON, metrics JSON, loss-history
//! CSV, plain-text result tables, and the subcommand implementations behind
//! the `hamreg` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod jobs;
pub mod table;

pub use error::{CliError, Result};
