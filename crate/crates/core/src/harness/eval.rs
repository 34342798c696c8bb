use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::Controller;
use crate::env::{ActionSpace, EnvConfig, EnvRng, Environment};
use crate::error::Result;
use crate::rng::{stream, Purpose};

/// Per-step averages over one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub avg_reward: f64,
    /// Average AoI-related cost.
    pub aa: f64,
    /// Average energy-related cost.
    pub ae: f64,
}

/// Runs `decisions` steps of `policy` from a freshly reset environment.
///
/// The environment streams are the `index`-th evaluation streams of `seed`,
/// so every policy evaluated with the same (seed, index) faces the same
/// requests and channel draws.
pub fn run_evaluation(
    policy: &dyn Controller,
    config: Arc<EnvConfig>,
    actions: Arc<ActionSpace>,
    decisions: usize,
    seed: u64,
    index: u32,
) -> Result<EvalMetrics> {
    let mut env = Environment::with_actions(config, actions.clone(), EnvRng::evaluation(seed, index));
    let mut explore = stream(seed, Purpose::EvalExplore, index);
    let (mut reward, mut aa, mut ae) = (0.0, 0.0, 0.0);
    for _ in 0..decisions {
        let a = policy.decide(env.state(), &actions, &mut explore)?;
        let out = env.step(a)?;
        reward += out.reward;
        aa += out.cost_aoi;
        ae += out.cost_energy;
    }
    let n = decisions as f64;
    Ok(EvalMetrics {
        avg_reward: reward / n,
        aa: aa / n,
        ae: ae / n,
    })
}

/// Convenience wrapper that enumerates the action space.
pub fn evaluate_controller(
    policy: &dyn Controller,
    config: &EnvConfig,
    decisions: usize,
    seed: u64,
    index: u32,
) -> Result<EvalMetrics> {
    config.validate()?;
    let actions = Arc::new(ActionSpace::enumerate(config.sensors, config.max_updates)?);
    run_evaluation(policy, Arc::new(config.clone()), actions, decisions, seed, index)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
