//! Experiment-grid orchestration.
//!
//! `config` declares the grid, `seeds` derives stable per-cell seeds,
//! `execute` runs the cells (data-parallel when the `parallel` feature is
//! on), and `reports` turns result rows into the artifact files.

pub mod config;
pub mod execute;
pub mod reports;
pub mod seeds;

pub use config::ExperimentConfig;
pub use execute::{run_experiment, ExperimentResult, PredSample, ResultSet, RowMetrics};
pub use reports::{aggregate, emit_reports, regenerate_reports};
