//! Experiment configuration, trial orchestration, aggregation and output.

mod config;
mod experiment;
mod sweep;

pub use config::{ExperimentConfig, NoiseSetting, SolverSetup, StepPolicy, DEFAULT_TUNING_GRID};
pub use experiment::{
    instance_seed, prepared, rows_by_cell, run_experiment, step_rule, summary_path, to_csv, write_outputs, AggregateRow,
    ExperimentOutput, StepReport, TrialRecord, CSV_HEADER, CSV_SCHEMA,
};
pub use sweep::{log_log_fit, sweep_csv, sweep_rates, SweepFit, SweepPoint, SweepReport};
