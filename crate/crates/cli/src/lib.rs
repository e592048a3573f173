//! Command-line tools and HTTP service for constrained parameter extraction.

pub mod commands;
pub mod service;
pub mod wire;

pub use commands::{run, Cli, CliError, MODELS_ENV};
