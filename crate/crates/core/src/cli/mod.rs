//! Configuration, expressions, caching, output and the command runner.

pub mod cache;
pub mod config;
pub mod expr;
pub mod io;
pub mod run;

pub use config::{parse_config, Driver, ExperimentConfig, Format};
pub use run::run;
