//! Experiment runner for the MIS sensing simulator: scenario files, sweeps,
//! beam maps, gradient checks and the exhaustive oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;

pub use config::{load_scenario, load_sweep, ConfigError, Method, ScenarioConfig, SweepSpec};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const RUNTIME: i32 = 3;
    pub const ORACLE_REFUSED: i32 = 4;
}

/// Maps an error chain onto an exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return exit::CONFIG;
        }
        if let Some(mis_core::MisError::OracleRefused(_)) = cause.downcast_ref::<mis_core::MisError>() {
            return exit::ORACLE_REFUSED;
        }
    }
    exit::RUNTIME
}
