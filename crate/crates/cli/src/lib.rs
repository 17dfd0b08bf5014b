//! Experiment pipelines behind the `relay-aoi` binary: solve, simulate,
//! sweep and inspect, each writing CSV with a config-hash comment line.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_inspect, cmd_simulate, cmd_solve, cmd_sweep, PolicySource, SimulateOutput, SolveOutput,
    SweepOutput, SweepRow,
};
pub use config::ExperimentConfig;
