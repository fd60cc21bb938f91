//! Configuration, orchestration and output for the solver CLI.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{ConfigError, RunConfig};
pub use pipeline::{run_pipeline, Check, Command, RunReport};
