//! Command-line driver for corpus generation, attacks, identifier search,
//! training, evaluation and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod record;

pub use commands::{run, Cli};
pub use error::CliError;
