//! Command-line pipeline: ingest → fit → dependence → simulate → optimize → backtest,
//! with every artifact stamped by the configuration hash.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod synthetic;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::Pipeline;
