//! Config parsing and experiment runners behind the `diffrep` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, Command, ConfigError, GridSpec, RunConfig};
pub use run::{run, run_to_string, RunError};
