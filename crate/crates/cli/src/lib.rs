//! Library side of the `seqrec` binary: file formats and subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod matrix;

pub use config::{ExperimentConfig, Psi};
pub use error::{CliError, CliResult};
pub use matrix::{MatrixRow, RatingsMatrix};
