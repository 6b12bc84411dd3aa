//! Library backing the `tracklab` binary; command implementations live
//! here so integration tests can drive them directly.

pub mod commands;
pub mod manifest;
pub mod plot;

pub use commands::{cmd_collect, cmd_compare, cmd_simulate, cmd_train, CliError, SimulateMode};
