//! Exact solutions for networks small enough to enumerate.

mod model;
mod rlearn;
mod rvi;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use model::{enumerate_transitions, Branch, TransitionModel, STATE_BOUND};
pub use rlearn::{tabular_r_learning, RLearningParams, RLearningResult};
pub use rvi::{evaluate_policy, recurrent_classes, relative_value_iteration, RviResult};

use crate::env::{ActionSpace, EnvConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub aoi: Vec<u32>,
    pub bias: f64,
    pub action: usize,
    /// Activation bit-vector of `action`.
    pub action_bits: u32,
}

/// Serializable oracle solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config: EnvConfig,
    pub gain: f64,
    pub residual: f64,
    pub iterations: usize,
    pub recurrent_classes: usize,
    pub states: Vec<StateEntry>,
}

impl OracleReport {
    pub fn new(config: &EnvConfig, model: &TransitionModel, rvi: &RviResult) -> Result<Self> {
        let space = ActionSpace::enumerate(config.sensors, config.max_updates)?;
        let states = (0..model.len())
            .map(|s| {
                Ok(StateEntry {
                    aoi: model.label(s).unwrap_or_default().to_vec(),
                    bias: rvi.bias[s],
                    action: rvi.policy[s],
                    action_bits: space.get(rvi.policy[s])?.bits(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            gain: rvi.gain,
            residual: rvi.residual,
            iterations: rvi.iterations,
            recurrent_classes: recurrent_classes(model, &rvi.policy),
            states,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            what: "oracle report",
            detail: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Enumerates, solves and packages a config in one call.
pub fn solve(config: &EnvConfig, tol: f64, max_iter: usize) -> Result<OracleReport> {
    let model = enumerate_transitions(config, STATE_BOUND)?;
    let rvi = relative_value_iteration(&model, tol, max_iter)?;
    OracleReport::new(config, &model, &rvi)
}
