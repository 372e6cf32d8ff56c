//! Configuration, experiment drivers and file output for the `cascade` binary.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Check, Command};
pub use config::SimulationConfig;
pub use error::{CliError, Result};
