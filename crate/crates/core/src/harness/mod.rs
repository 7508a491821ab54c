//! Experiment orchestration: declarative configuration, seeded Monte-Carlo
//! trials with paired scheme comparisons, parameter sweeps and plot-ready
//! exports.

pub mod config;
pub mod export;
pub mod run;

pub use config::{ExperimentConfig, SweepConfig, SWEEP_WHITELIST};
pub use export::{export, write_csv, write_json, ExportFormat};
pub use run::{
    derive_trial_seed, run_sweep, run_trial, AggregateRow, SchemeMetrics, TrialKind, TrialRecord,
};
