//! File formats, experiment harness and command-line front end for
//! `heightbev-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;

pub use config::{BevSource, ExperimentConfig};
pub use error::{CliError, Result};
