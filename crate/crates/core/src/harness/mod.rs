//! Experiment orchestration: configuration, the training loop with periodic
//! evaluation, metrics export and multi-seed sweeps.

mod config;
mod eval;
mod export;
mod sweep;
mod trainer;

pub use config::{desk_env, tiny_env, ExperimentConfig, Preset};
pub use eval::{evaluate_controller, mean_std, run_evaluation, EvalMetrics};
pub use export::{
    export_metrics, summaries_from_json, summaries_to_json, write_csv, RunSummary, SUMMARY_WINDOW,
};
pub use sweep::{run_sweep, Aggregate, SweepResult, SweepRun};
pub use trainer::{run_training, EvalReport, EvalRow, Trainer};
