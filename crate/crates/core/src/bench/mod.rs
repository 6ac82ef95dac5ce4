//! Experiment harness: declarative configs, missing-level sweeps with grid
//! tuning, result files, and the command-line front end.

pub mod cli;
mod config;
mod emit;
mod sweep;

pub use config::{
    CompletionSettings, Criterion, DataSource, ExperimentConfig, GraphSpec, GridSpec, Method, OutputSpec, SplitSpec,
    TuningMode,
};
pub use emit::{
    aggregate, emit_results, write_aggregate_csv, write_rows_csv, write_timings_csv, write_tuning_csv, AggregateRow,
    EmittedFiles, Summary,
};
pub use sweep::{
    derive_seed, method_moments, run_sweep, run_sweep_with, sort_rows, tune_all, tune_grid, Candidate, ResultRow,
    SweepOutcome, TuningChoice,
};
