//! Configuration-driven experiments on top of `nercc-core`: paired straggler
//! and smoothing sweeps, smoothing-parameter tuning, CSV output and SVG plots.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;

pub use config::ExperimentConfig;
pub use error::{ExperimentError, Result};
pub use experiment::{run_experiment, sweep_lambda, sweep_stragglers, tune_lambdas, LambdaSweepReport, TuneReport};
pub use plot::{render_plot, PlotSpec};
