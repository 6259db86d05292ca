//! Batch front-end for the normal-form and simulation library: config
//! handling, the subcommands and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;

pub use config::RunConfig;
