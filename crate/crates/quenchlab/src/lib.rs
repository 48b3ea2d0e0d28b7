//! Command-line front end for `quenchlab-core`: scenario configuration,
//! experiment drivers, parameter sweeps and the CSV/JSON file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod output;
pub mod sweep;

pub use config::ScenarioConfig;
pub use error::CliError;
