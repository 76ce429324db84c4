//! File formats, ingestion, configuration and the `flowprice` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod io;
pub mod pathspec;
pub mod pipeline;
pub mod synth;

pub use error::{CliError, Result};
