//! Library side of the `shotseq` command: run configuration, the training
//! loop over manifest datasets, evaluation and the subcommands.

pub mod commands;
pub mod config;
pub mod dataset;
mod error;
pub mod train;

pub use commands::{run, Cli, Command};
pub use config::RunConfig;
pub use dataset::LoadedDataset;
pub use error::{CliError, Result};
