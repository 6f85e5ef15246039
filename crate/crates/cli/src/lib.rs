//! Configuration, persistence and the command-line front end for `acgf-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{dispatch, Cli, Command};
pub use config::RunConfig;
pub use error::CliError;
