//! File formats and the `gripcast` command line around [`gripcast_core`].
//!
//! Subcommands: `synth`, `train`, `eval`, `predict` and `stream`. Exit codes
//! are 0 on success, 1 for usage errors, 2 for data errors and 3 for broken
//! internal invariants.

pub mod checkpoint;
pub mod commands;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod stream;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};
