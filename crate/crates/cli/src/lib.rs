//! Configuration, experiment drivers and output writers for the `momlab`
//! command line tool.

pub mod config;
pub mod experiments;
pub mod output;
pub mod svg;

pub use config::{ConfigError, ExperimentKind, RunConfig};
pub use experiments::{run, Report, RunOptions, RunOutcome};
