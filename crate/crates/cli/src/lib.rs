//! Experiment runner for the feedback balls-and-bins toolkit: configuration,
//! commands and output files. The `feedbin` binary is a thin wrapper.

pub mod commands;
pub mod config;
pub mod output;

pub use config::ExperimentConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAIL: u8 = 1;
    pub const INDETERMINATE: u8 = 2;
}
