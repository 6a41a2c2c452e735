//! Benchmark orchestration: configuration, the repetition runner, result
//! files and model checkpoints.

pub mod checkpoint;
pub mod config;
pub mod results;
pub mod runner;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{ExperimentConfig, OutputFormat};
pub use results::{
    format_summary, read_results, summarize, write_results, MethodSummary, MetricSummary, ResultRow,
};
pub use runner::{
    fit_single, prepare_repetition, run_experiment, run_experiment_with, Evaluator, MethodFitter,
    Repetition, RunOptions,
};
