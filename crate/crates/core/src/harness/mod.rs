//! Experiment orchestration: configuration, seeded Monte-Carlo runs, metrics
//! and CSV/JSON output.

pub mod commands;
pub mod config;
pub mod metrics;
pub mod montecarlo;
pub mod output;

pub use config::{Calibration, ExperimentConfig, PolicyKind, Preset};
pub use metrics::{circular_rmse, period_error, RunMetrics};
pub use montecarlo::{monte_carlo, training_run, MonteCarloOutcome, RunFailure, TrainingRun};
