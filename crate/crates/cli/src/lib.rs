//! Experiment runner for federated multi-task SVMs: configuration files,
//! the experiment grid, delay calibration and the cost benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod calibrate;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod timing;

pub use error::{CliError, CliResult};
