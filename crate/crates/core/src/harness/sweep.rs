use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::AgentVariant;
use crate::harness::config::ExperimentConfig;
use crate::harness::eval::mean_std;
use crate::harness::export::{RunSummary, SUMMARY_WINDOW};
use crate::harness::trainer::{run_training, EvalReport};

/// Outcome of one (variant, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub variant: AgentVariant,
    pub seed: u64,
    pub result: Result<EvalReport, String>,
}

/// Across-seed statistics of one listed variant: mean and std of the
/// per-run last-window mean reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: String,
    pub gamma: Option<f64>,
    pub runs: usize,
    pub failed: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepResult {
    pub fn reports(&self) -> Vec<EvalReport> {
        self.runs
            .iter()
            .filter_map(|r| r.result.as_ref().ok().cloned())
            .collect()
    }
}

/// Trains every listed variant on every seed of `base`. Runs execute in
/// parallel; a variant sees the same seeds, and therefore the same
/// environment streams, as every other variant.
pub fn run_sweep(base: &ExperimentConfig, variants: &[AgentVariant]) -> SweepResult {
    let jobs: Vec<(usize, AgentVariant, u64)> = variants
        .iter()
        .enumerate()
        .flat_map(|(i, v)| base.seeds.iter().map(move |&s| (i, *v, s)))
        .collect();
    let results: Vec<(usize, SweepRun)> = jobs
        .into_par_iter()
        .map(|(i, variant, seed)| {
            let config = ExperimentConfig {
                variant,
                ..base.clone()
            };
            let result = run_training(&config, seed)
                .map(|(_, report)| report)
                .map_err(|e| e.to_string());
            (i, SweepRun {
                variant,
                seed,
                result,
            })
        })
        .collect();

    let aggregates = variants
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mine: Vec<&SweepRun> = results.iter().filter(|(j, _)| *j == i).map(|(_, r)| r).collect();
            let means: Vec<f64> = mine
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .map(|rep| RunSummary::of(rep, SUMMARY_WINDOW).mean_reward)
                .collect();
            let (mean_reward, std_reward) = mean_std(&means);
            Aggregate {
                variant: v.name().to_string(),
                gamma: v.gamma(),
                runs: means.len(),
                failed: mine.len() - means.len(),
                mean_reward,
                std_reward,
            }
        })
        .collect();
    SweepResult {
        runs: results.into_iter().map(|(_, r)| r).collect(),
        aggregates,
    }
}
