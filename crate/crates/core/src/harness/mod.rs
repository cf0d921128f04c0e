//! Experiment harness: flat key-value configs with profiles, the run loop
//! with CSV metrics and checkpoints, `(M, η)` sweeps with a recomputable
//! summary, deterministic SVG plots, and run-versus-run comparison reports.

mod checkpoint;
mod compare;
mod config;
mod metrics;
mod plot;
mod runner;
mod sweep;

pub use checkpoint::Checkpoint;
pub use compare::{compare_runs, render_markdown, ComparisonReport};
pub use config::{ExperimentConfig, Profile};
pub use metrics::{
    convergence_epoch, failure_row, metrics_csv, metrics_header, timing_csv, trailing_mean,
    CsvTable, MetricRecord,
};
pub use plot::emit_plots;
pub use runner::{run_experiment, RunArtifacts};
pub use sweep::{run_sweep, summarize_cells, sweep_cells, CellResult, SweepCell, SweepOutcome};

use crate::agent::AgentError;
use crate::env::EnvError;
use thiserror::Error;

/// Environment variable limiting sweep worker threads.
pub const WORKERS_ENV_VAR: &str = "D2RL_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {reason}")]
    Csv { path: String, reason: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{0}: CSV has no data rows")]
    EmptyCsv(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
