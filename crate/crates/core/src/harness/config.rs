use std::fmt::Write as _;

use crate::agents::{AgentVariant, Hyper};
use crate::config::{parse_list, KeyValues};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::CLIP_NORM;

/// Everything that determines a training run apart from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub variant: AgentVariant,
    pub lr: f64,
    /// α0
    pub avg_lr: f64,
    pub batch_size: usize,
    /// T0, training iterations between target syncs.
    pub sync_every: u64,
    pub clip_norm: f64,
    /// Hidden widths; `None` picks the variant's reference widths.
    pub hidden: Option<Vec<usize>>,
    /// |D|
    pub replay_capacity: usize,
    /// T_s, environment steps before training starts.
    pub replay_start: u64,
    /// T_max, total environment steps.
    pub total_steps: u64,
    /// Environment steps over which ε falls from 1 to 0.01; `None` means |D|.
    pub anneal_steps: Option<u64>,
    /// Training iterations between evaluations.
    pub eval_every: u64,
    pub eval_decisions: usize,
    pub eval_epsilon: f64,
    /// Starting Ū; `None` means the config's worst-case per-step reward.
    pub initial_avg_reward: Option<f64>,
    pub seeds: Vec<u64>,
}

/// Named starting points for [`ExperimentConfig::from_key_values`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// K = 8, N = 24 with the reference hyperparameters.
    Paper,
    /// K = 4, N = 8: trains in minutes on one core.
    Desk,
    /// K = N = 1, Δ_max = 4: small enough for the exact oracle.
    Tiny,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            "tiny" => Ok(Preset::Tiny),
            _ => Err(Error::Config(format!(
                "unknown preset `{s}` (expected paper, desk or tiny)"
            ))),
        }
    }
}

/// K = N = 1, D_u = D_d = 1, Δ_max = 4, P = 0.5, p_O = 0.1, 10 mJ per phase,
/// β1 = 1, β2 = 0.05.
pub fn tiny_env() -> EnvConfig {
    let mut c = EnvConfig::paper(1, 1);
    c.aoi_max = 4;
    c.request_prob = vec![0.5];
    c.fail_prob = vec![0.1];
    c.energy_sense = vec![10.0];
    c.energy_tx = vec![10.0];
    c.beta_aoi = 1.0;
    c.beta_energy = 0.05;
    c
}

/// K = 4, N = 8, M = 2, reference values otherwise.
pub fn desk_env() -> EnvConfig {
    EnvConfig::paper(4, 8)
}

impl ExperimentConfig {
    /// Reference setup: K = 8, N = 24, DDR-DSU, T_s = 5·10⁴,
    /// T_max = T_s + 120 evaluations every 2·10³ iterations.
    pub fn paper() -> Self {
        Self {
            env: EnvConfig::paper(8, 24),
            variant: AgentVariant::DDR,
            lr: 5e-4,
            avg_lr: 5e-4,
            batch_size: 64,
            sync_every: 2_000,
            clip_norm: CLIP_NORM,
            hidden: None,
            replay_capacity: 200_000,
            replay_start: 50_000,
            total_steps: 290_000,
            anneal_steps: None,
            eval_every: 2_000,
            eval_decisions: 10_000,
            eval_epsilon: 0.05,
            initial_avg_reward: None,
            seeds: vec![1],
        }
    }

    /// K = 4, N = 8, 6·10⁴ training iterations after a 10⁴-step warm-up.
    pub fn desk() -> Self {
        Self {
            env: desk_env(),
            replay_capacity: 50_000,
            replay_start: 10_000,
            total_steps: 70_000,
            ..Self::paper()
        }
    }

    /// The oracle instance with 5·10⁴ environment steps in total.
    pub fn tiny() -> Self {
        Self {
            env: tiny_env(),
            replay_capacity: 10_000,
            replay_start: 2_000,
            total_steps: 50_000,
            sync_every: 500,
            eval_every: 2_000,
            ..Self::paper()
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
            Preset::Tiny => Self::tiny(),
        }
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            lr: self.lr,
            avg_lr: self.avg_lr,
            batch_size: self.batch_size,
            sync_every: self.sync_every,
            clip_norm: self.clip_norm,
            hidden: self
                .hidden
                .clone()
                .unwrap_or_else(|| self.variant.default_hidden()),
        }
    }

    pub fn anneal(&self) -> u64 {
        self.anneal_steps.unwrap_or(self.replay_capacity as u64)
    }

    pub fn initial_avg(&self) -> f64 {
        self.initial_avg_reward
            .unwrap_or_else(|| self.env.worst_case_reward())
    }

    /// Number of evaluations a full run produces.
    pub fn evaluations(&self) -> u64 {
        self.total_steps.saturating_sub(self.replay_start) / self.eval_every
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        let err = |m: String| Err(Error::Config(m));
        if self.replay_start >= self.total_steps {
            return err(format!(
                "replay_start ({}) must be below total_steps ({})",
                self.replay_start, self.total_steps
            ));
        }
        if self.batch_size == 0 || self.batch_size as u64 > self.replay_start {
            return err(format!(
                "batch_size must be in 1..=replay_start, got {}",
                self.batch_size
            ));
        }
        if self.replay_capacity < self.batch_size {
            return err("replay_capacity must hold at least one minibatch".into());
        }
        if self.sync_every == 0 || self.eval_every == 0 || self.eval_decisions == 0 {
            return err("sync_every, eval_every and eval_decisions must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return err(format!("eval_epsilon must be in [0,1], got {}", self.eval_epsilon));
        }
        for (name, v) in [("lr", self.lr), ("avg_lr", self.avg_lr), ("clip_norm", self.clip_norm)] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if let Some(h) = &self.hidden {
            if h.contains(&0) {
                return err("hidden widths must be positive".into());
            }
        }
        if self.initial_avg_reward.is_some_and(|v| !v.is_finite()) {
            return err("initial_avg_reward must be finite".into());
        }
        if self.seeds.is_empty() {
            return err("at least one seed is required".into());
        }
        Ok(())
    }

    /// Reads a config: env keys as in [`EnvConfig::from_key_values`] plus
    /// `variant`, `gamma`, `lr`, `avg_lr`, `batch_size`, `sync_every`,
    /// `clip_norm`, `hidden`, `replay_capacity`, `replay_start`,
    /// `total_steps`, `anneal_steps`, `eval_every`, `eval_decisions`,
    /// `eval_epsilon`, `initial_avg_reward`, `seeds`. Missing keys come from
    /// `base`; unknown keys are rejected.
    pub fn from_key_values(kv: &KeyValues, base: Preset) -> Result<Self> {
        let mut c = Self::preset(base);
        let env_keys = [
            "sensors", "users", "max_updates", "sup_slots", "ddp_slots", "slot_seconds",
            "aoi_max", "request_prob", "popularity", "fail_prob", "tx_power_mw",
            "energy_sense", "energy_tx", "weights", "beta_aoi", "beta_energy",
        ];
        if env_keys.iter().any(|k| kv.contains(k)) {
            let mut merged = KeyValues::parse(&c.env.to_key_values())?;
            for k in env_keys {
                if let Some(v) = kv.raw(k) {
                    merged.set(k, v);
                }
            }
            // quantities derived from K, N or the phase lengths are
            // recomputed unless given explicitly
            let mut derived: Vec<&str> = Vec::new();
            if ["sensors", "users", "sup_slots", "ddp_slots"].iter().any(|k| kv.contains(k)) {
                derived.extend(["max_updates", "aoi_max", "request_prob", "popularity", "fail_prob", "weights"]);
            }
            if ["sensors", "sup_slots", "slot_seconds", "tx_power_mw"].iter().any(|k| kv.contains(k)) {
                derived.extend(["energy_sense", "energy_tx"]);
            }
            for k in derived {
                if !kv.contains(k) {
                    merged.remove(k);
                }
            }
            c.env = EnvConfig::from_key_values(&merged)?;
        }
        let gamma: Option<f64> = kv.get("gamma")?;
        if let Some(v) = kv.raw("variant") {
            c.variant = AgentVariant::parse(v, gamma)?;
        } else if gamma.is_some() {
            c.variant = AgentVariant::parse(c.variant.name(), gamma)?;
        }
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = kv.get(stringify!($field))? {
                    c.$field = v;
                }
            };
        }
        take!(lr);
        take!(avg_lr);
        take!(batch_size);
        take!(sync_every);
        take!(clip_norm);
        take!(replay_capacity);
        take!(replay_start);
        take!(total_steps);
        take!(eval_every);
        take!(eval_decisions);
        take!(eval_epsilon);
        if let Some(v) = kv.raw("hidden") {
            c.hidden = if v.trim() == "default" {
                None
            } else {
                Some(parse_list("hidden", v)?)
            };
        }
        if let Some(v) = kv.raw("anneal_steps") {
            c.anneal_steps = if v.trim() == "default" {
                None
            } else {
                Some(parse_list::<u64>("anneal_steps", v)?[0])
            };
        }
        if let Some(v) = kv.raw("initial_avg_reward") {
            c.initial_avg_reward = if v.trim() == "default" {
                None
            } else {
                Some(parse_list::<f64>("initial_avg_reward", v)?[0])
            };
        }
        if let Some(v) = kv.raw("seeds") {
            c.seeds = parse_list("seeds", v)?;
        }
        kv.deny_unused()?;
        c.validate()?;
        Ok(c)
    }

    /// Writes every key, in the format read by
    /// [`ExperimentConfig::from_key_values`].
    pub fn to_key_values(&self) -> String {
        let mut s = self.env.to_key_values();
        let opt = |v: Option<String>| v.unwrap_or_else(|| "default".into());
        let _ = writeln!(s, "variant = {}", self.variant.name());
        if let Some(g) = self.variant.gamma() {
            let _ = writeln!(s, "gamma = {g}");
        }
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "avg_lr = {}", self.avg_lr);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "sync_every = {}", self.sync_every);
        let _ = writeln!(s, "clip_norm = {}", self.clip_norm);
        let hidden = self.hidden.as_ref().map(|h| {
            h.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", ")
        });
        let _ = writeln!(s, "hidden = {}", opt(hidden));
        let _ = writeln!(s, "replay_capacity = {}", self.replay_capacity);
        let _ = writeln!(s, "replay_start = {}", self.replay_start);
        let _ = writeln!(s, "total_steps = {}", self.total_steps);
        let _ = writeln!(s, "anneal_steps = {}", opt(self.anneal_steps.map(|v| v.to_string())));
        let _ = writeln!(s, "eval_every = {}", self.eval_every);
        let _ = writeln!(s, "eval_decisions = {}", self.eval_decisions);
        let _ = writeln!(s, "eval_epsilon = {}", self.eval_epsilon);
        let _ = writeln!(
            s,
            "initial_avg_reward = {}",
            opt(self.initial_avg_reward.map(|v| v.to_string()))
        );
        let seeds: Vec<String> = self.seeds.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(", "));
        s
    }
}
