//! File formats, experiment presets and the command-line front end for
//! `ratchet-core`.
//!
//! The solver crate is `no_std`; everything that touches the file system,
//! threads or the clock lives here.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod presets;
pub mod simulate;
pub mod svg;

pub use error::CliError;
