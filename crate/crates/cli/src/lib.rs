//! File-level driver for the `blockspec` library.
//!
//! Every command produces a schema-versioned JSON report on stdout; see
//! [`error::exit`] for the exit statuses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod manifest;
pub mod matrix_io;
pub mod report;

pub use blockspec::BoundName;
pub use commands::{cmd_bounds, cmd_compress, cmd_plan, cmd_sweep, cmd_verify, run, Cli, Outcome};
pub use error::CliError;
pub use manifest::Manifest;
