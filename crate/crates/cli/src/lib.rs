//! Configuration, orchestration and artifact output for the `magwell` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod presets;

pub use commands::{run, Command, Flags};
pub use config::RunConfig;
pub use error::CliError;
