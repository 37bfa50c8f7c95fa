//! The `bmgrw` command line: config parsing, dispatch and artifact output.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod dispatch;

pub use config::{parse_config, ConfigError, Overrides, RunConfig, Threads};
pub use dispatch::{dispatch, Command, ExitStatus};
