//! Batch front end for cup game experiments.

pub mod commands;
pub mod spec;

pub use commands::{execute, exit_code, Status};
pub use spec::{Cli, Command, ExperimentSpec};
