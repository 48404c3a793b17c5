//! Command-line driver: configuration files, field solves, single trials,
//! sweeps, CSV output and SVG plots.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{main_with_args, Cli, CliError, Command, RunManifest};
pub use config::{parse_config, parse_config_str, write_config, ConfigFileError, LoadedConfig, Override, SweepSpec};
