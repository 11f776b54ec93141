//! Library backing the `cardioaug` binary: manifest/config handling, PNG
//! I/O, provenance logging, and the subcommand runners. Everything the
//! binary does is callable from here, so integration tests can drive whole
//! pipeline stages in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pngio;
pub mod provenance;

pub use error::{CliError, Result};
