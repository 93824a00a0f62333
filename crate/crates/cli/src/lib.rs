//! Command-line front end: CSV ingestion, the `scan`, `segment`, `simulate`
//! and `shuffle-test` commands, and their JSON/CSV/TSV outputs.

pub mod args;
pub mod commands;
pub mod error;
pub mod ingest;

pub use args::{Cli, Command};
pub use commands::run;
pub use error::CliError;
