//! Experiment configuration, training runs and results files.

pub mod aggregate;
pub mod config;
pub mod csv_out;
pub mod runner;

pub use aggregate::{aggregate, t_half_width, SummaryRow};
pub use config::{presets, seeds_from, ExperimentConfig, KChoice, LayerSpec, TaskConfig, TrainingConfig};
pub use csv_out::{export_csv, read_results, read_run_headers, CsvRow};
pub use runner::{evaluate, run_experiment, run_seed, MetricPoint, RunRecord, RunStatus, RUNNING_WINDOW};
