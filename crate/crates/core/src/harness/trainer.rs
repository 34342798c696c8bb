use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentVariant, EpsilonSchedule};
use crate::codec::{Reader, Writer};
use crate::config::KeyValues;
use crate::env::{ActionSpace, EnvConfig, EnvRng, EnvState, Environment};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Preset};
use crate::harness::eval::{mean_std, run_evaluation, EvalMetrics};
use crate::replay::ReplayBuffer;
use crate::rng::{stream, Purpose, RngSnapshot, SimRng};

const MAGIC: &[u8; 8] = b"DSUCKPT1";

/// One periodic evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    /// Training iterations completed when the evaluation ran.
    pub step: u64,
    pub avg_reward: f64,
    pub aa: f64,
    pub ae: f64,
}

/// Evaluation history of one (variant, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(variant: &AgentVariant, seed: u64) -> Self {
        Self {
            variant: variant.name().to_string(),
            gamma: variant.gamma(),
            seed,
            rows: Vec::new(),
        }
    }

    /// Mean and population std of the average reward over the last `k`
    /// evaluations.
    pub fn last_stats(&self, k: usize) -> (f64, f64) {
        let start = self.rows.len().saturating_sub(k);
        let v: Vec<f64> = self.rows[start..].iter().map(|r| r.avg_reward).collect();
        mean_std(&v)
    }
}

/// Training loop state for one seed: exploration with an annealed ε,
/// replay, one training iteration per environment step after the warm-up,
/// target syncs and periodic evaluation of the target network.
pub struct Trainer {
    config: Arc<ExperimentConfig>,
    env_config: Arc<EnvConfig>,
    actions: Arc<ActionSpace>,
    seed: u64,
    agent: Agent,
    env: Environment,
    buffer: ReplayBuffer,
    explore: SimRng,
    replay_rng: SimRng,
    schedule: EpsilonSchedule,
    env_steps: u64,
    report: EvalReport,
}

impl Trainer {
    pub fn new(config: Arc<ExperimentConfig>, seed: u64) -> Result<Self> {
        config.validate()?;
        let env_config = Arc::new(config.env.clone());
        let actions = Arc::new(ActionSpace::enumerate(env_config.sensors, env_config.max_updates)?);
        let agent = Agent::new(
            config.variant,
            config.hyper(),
            env_config.state_dim(),
            actions.len(),
            config.initial_avg(),
            &mut stream(seed, Purpose::Init, 0),
        )?;
        let env = Environment::with_actions(env_config.clone(), actions.clone(), EnvRng::training(seed));
        let buffer = ReplayBuffer::new(config.replay_capacity, env_config.state_dim(), actions.len())?;
        Ok(Self {
            schedule: EpsilonSchedule::linear(config.anneal()),
            report: EvalReport::new(&config.variant, seed),
            explore: stream(seed, Purpose::Explore, 0),
            replay_rng: stream(seed, Purpose::Replay, 0),
            config,
            env_config,
            actions,
            seed,
            agent,
            env,
            buffer,
            env_steps: 0,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn report(&self) -> &EvalReport {
        &self.report
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn is_done(&self) -> bool {
        self.env_steps >= self.config.total_steps
    }

    /// One environment step, plus a training iteration (and possibly an
    /// evaluation) once past the warm-up. Returns the new evaluation row.
    pub fn step(&mut self) -> Result<Option<EvalRow>> {
        let state = self.env.encoded_state();
        let eps = self.schedule.epsilon_at(self.env_steps);
        let a = self.agent.select_action(&state, eps, &mut self.explore)?;
        let out = self.env.step(a)?;
        let next = self.env.encoded_state();
        self.buffer.push_parts(&state, a, out.reward, &next)?;
        self.env_steps += 1;
        if self.env_steps <= self.config.replay_start {
            return Ok(None);
        }
        self.agent.train_step(&self.buffer, &mut self.replay_rng)?;
        if !self.agent.avg_reward.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "average-reward estimate diverged at training iteration {}",
                self.agent.train_steps
            )));
        }
        let mut row = None;
        // the evaluated snapshot is the target network as it stands before
        // this iteration's sync
        if self.agent.train_steps.is_multiple_of(self.config.eval_every) {
            let m = self.evaluate()?;
            let r = EvalRow {
                step: self.agent.train_steps,
                avg_reward: m.avg_reward,
                aa: m.aa,
                ae: m.ae,
            };
            self.report.rows.push(r);
            row = Some(r);
        }
        self.agent.maybe_sync_target();
        Ok(row)
    }

    fn evaluate(&self) -> Result<EvalMetrics> {
        let policy = self.agent.policy(self.config.eval_epsilon, self.env_config.aoi_max);
        run_evaluation(
            &policy,
            self.env_config.clone(),
            self.actions.clone(),
            self.config.eval_decisions,
            self.seed,
            self.report.rows.len() as u32,
        )
    }

    /// Runs until `total_steps` environment steps or `limit` further steps,
    /// whichever comes first.
    pub fn run_for(&mut self, limit: u64) -> Result<()> {
        let stop = self.env_steps.saturating_add(limit).min(self.config.total_steps);
        while self.env_steps < stop {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_for(u64::MAX)
    }

    pub fn into_parts(self) -> (Agent, EvalReport) {
        (self.agent, self.report)
    }

    /// Serializes the complete loop state; resuming from it reproduces the
    /// uninterrupted run bit for bit.
    pub fn checkpoint(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.str(&self.config.to_key_values());
        w.u64(self.seed);
        w.u64(self.env_steps);
        w.str(&self.agent.to_text());
        self.buffer.encode(&mut w);
        w.u32s(self.env.state().as_slice());
        for snap in self.env.rng().snapshot() {
            snap.encode(&mut w);
        }
        RngSnapshot::capture(&self.explore).encode(&mut w);
        RngSnapshot::capture(&self.replay_rng).encode(&mut w);
        w.usize(self.report.rows.len());
        for r in &self.report.rows {
            w.u64(r.step);
            w.f64(r.avg_reward);
            w.f64(r.aa);
            w.f64(r.ae);
        }
        w.into_bytes()
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect(MAGIC)?;
        let config_text = r.str()?;
        let config = ExperimentConfig::from_key_values(&KeyValues::parse(&config_text)?, Preset::Paper)?;
        let seed = r.u64()?;
        let mut t = Self::new(Arc::new(config), seed)?;
        t.env_steps = r.u64()?;
        t.agent = Agent::from_text(&r.str()?, t.config.hyper())?;
        t.buffer = ReplayBuffer::decode(&mut r)?;
        let state = EnvState::from_rows(t.env_config.sensors, t.env_config.users, r.u32s()?)?;
        let snaps = [RngSnapshot::decode(&mut r)?, RngSnapshot::decode(&mut r)?];
        t.env.restore(state, EnvRng::restore(&snaps))?;
        t.explore = RngSnapshot::decode(&mut r)?.restore();
        t.replay_rng = RngSnapshot::decode(&mut r)?.restore();
        let rows = r.usize()?;
        for _ in 0..rows {
            t.report.rows.push(EvalRow {
                step: r.u64()?,
                avg_reward: r.f64()?,
                aa: r.f64()?,
                ae: r.f64()?,
            });
        }
        if !r.is_empty() {
            return Err(Error::Format {
                what: "checkpoint",
                detail: "trailing bytes".into(),
            });
        }
        let consistent = t.agent.variant == t.config.variant
            && t.agent.num_actions() == t.actions.len()
            && t.buffer.state_dim() == t.env_config.state_dim();
        if !consistent {
            return Err(Error::Format {
                what: "checkpoint",
                detail: "agent or replay buffer does not match the stored configuration".into(),
            });
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.checkpoint()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::restore(&bytes)
    }
}

/// Trains one seed to completion and returns the final agent, whose target
/// network is the learned policy.
pub fn run_training(config: &ExperimentConfig, seed: u64) -> Result<(Agent, EvalReport)> {
    let mut t = Trainer::new(Arc::new(config.clone()), seed)?;
    t.run()?;
    Ok(t.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        ExperimentConfig {
            env: crate::harness::config::tiny_env(),
            hidden: Some(vec![8, 8]),
            replay_capacity: 300,
            replay_start: 100,
            total_steps: 400,
            sync_every: 20,
            eval_every: 50,
            eval_decisions: 50,
            batch_size: 16,
            ..ExperimentConfig::paper()
        }
    }

    #[test]
    fn evaluation_count_and_determinism() {
        let c = quick();
        let (_, a) = run_training(&c, 3).unwrap();
        assert_eq!(a.rows.len() as u64, c.evaluations());
        assert_eq!(a.rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![50, 100, 150, 200, 250, 300]);
        let (_, b) = run_training(&c, 3).unwrap();
        assert_eq!(a, b);
        let (_, other) = run_training(&c, 4).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let c = Arc::new(quick());
        let mut full = Trainer::new(c.clone(), 9).unwrap();
        full.run().unwrap();

        let mut first = Trainer::new(c, 9).unwrap();
        first.run_for(237).unwrap();
        let bytes = first.checkpoint();
        drop(first);
        let mut resumed = Trainer::restore(&bytes).unwrap();
        assert_eq!(resumed.env_steps(), 237);
        resumed.run().unwrap();
        assert_eq!(resumed.report(), full.report());
        assert_eq!(resumed.agent(), full.agent());
    }

    #[test]
    fn corrupt_checkpoint_is_rejected() {
        let t = Trainer::new(Arc::new(quick()), 1).unwrap();
        let mut bytes = t.checkpoint();
        assert!(Trainer::restore(&bytes[..bytes.len() - 5]).is_err());
        bytes[0] = b'X';
        assert!(Trainer::restore(&bytes).is_err());
    }
}
