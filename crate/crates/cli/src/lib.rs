//! Configuration, commands and report writers behind the `cheeger-lab`
//! binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{cmd_cheeger, cmd_eigen, cmd_sweep, Status};
pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
pub use verify::{cmd_verify, run_suites, Scale, VerifyOptions};
