//! Experiment harness: configuration, run orchestration, metrics and plots.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;

pub use config::{parse_config, render_config, Algorithm, ExperimentConfig, ModelSpec};
pub use metrics::{moving_average, RunRecord, Smoothed};
pub use plot::{emit_plot, render_svg};
pub use run::{run_experiment, sweep};
