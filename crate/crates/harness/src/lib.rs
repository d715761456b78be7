//! Experiment harness for the wave-model laboratory: declarative configs,
//! parameter sweeps, slope fitting, invariant suites, and report output.

pub mod config;
pub mod experiments;
pub mod report;
pub mod suites;
