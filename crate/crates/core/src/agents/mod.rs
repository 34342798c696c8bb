//! Deep R-network and Q-network agents sharing one training skeleton, and
//! the greedy and random baselines.
//!
//! The four learning variants differ on two axes: the family (average-reward
//! R-learning target U − Ū + max R, or discounted target U + γ max Q) and the
//! architecture (dueling or single-stream).

mod baselines;
mod network;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;

pub use baselines::{greedy_action, random_action, Controller, GreedyPolicy, NetworkPolicy, RandomPolicy};
pub use network::{argmax, NetCache, Network};

use crate::error::{Error, Result};
use crate::nn::{AdamState, Mlp, Tokens, CLIP_NORM};
use crate::replay::{Minibatch, ReplayBuffer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Maximizes the long-run average reward; tracks the estimate Ū.
    AverageReward,
    Discounted { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentVariant {
    pub family: Family,
    pub dueling: bool,
}

impl AgentVariant {
    pub const DDR: Self = Self {
        family: Family::AverageReward,
        dueling: true,
    };
    pub const DR: Self = Self {
        family: Family::AverageReward,
        dueling: false,
    };

    pub fn ddq(gamma: f64) -> Self {
        Self {
            family: Family::Discounted { gamma },
            dueling: true,
        }
    }

    pub fn dq(gamma: f64) -> Self {
        Self {
            family: Family::Discounted { gamma },
            dueling: false,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.family {
            Family::AverageReward => None,
            Family::Discounted { gamma } => Some(gamma),
        }
    }

    /// Lower-case name without γ: `ddr-dsu`, `dr-dsu`, `ddq-dsu`, `dq-dsu`.
    pub fn name(&self) -> &'static str {
        match (self.family, self.dueling) {
            (Family::AverageReward, true) => "ddr-dsu",
            (Family::AverageReward, false) => "dr-dsu",
            (Family::Discounted { .. }, true) => "ddq-dsu",
            (Family::Discounted { .. }, false) => "dq-dsu",
        }
    }

    /// Reference hidden widths: 128/128 per dueling stream, 256/256 otherwise.
    pub fn default_hidden(&self) -> Vec<usize> {
        if self.dueling {
            vec![128, 128]
        } else {
            vec![256, 256]
        }
    }

    /// Parses a name, with γ either given separately or appended as
    /// `ddq-dsu:0.9`.
    pub fn parse(name: &str, gamma: Option<f64>) -> Result<Self> {
        let (base, inline) = match name.split_once(':') {
            Some((b, g)) => {
                let g: f64 = g
                    .parse()
                    .map_err(|_| Error::Config(format!("bad discount factor in `{name}`")))?;
                (b, Some(g))
            }
            None => (name, None),
        };
        let (dueling, average) = match base.to_ascii_lowercase().as_str() {
            "ddr-dsu" => (true, true),
            "dr-dsu" => (false, true),
            "ddq-dsu" => (true, false),
            "dq-dsu" => (false, false),
            _ => return Err(Error::Config(format!("unknown agent variant `{name}`"))),
        };
        let family = if average {
            if inline.is_some() {
                return Err(Error::Config(format!("`{base}` takes no discount factor")));
            }
            Family::AverageReward
        } else {
            let gamma = inline
                .or(gamma)
                .ok_or_else(|| Error::Config(format!("`{base}` needs a discount factor")))?;
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::Config(format!(
                    "discount factor must be in (0,1), got {gamma}"
                )));
            }
            Family::Discounted { gamma }
        };
        Ok(Self { family, dueling })
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gamma() {
            None => f.write_str(self.name()),
            Some(g) => write!(f, "{}:{g}", self.name()),
        }
    }
}

impl FromStr for AgentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, None)
    }
}

/// Linear exploration schedule, constant once `anneal_steps` is reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    pub fn linear(anneal_steps: u64) -> Self {
        Self {
            start: 1.0,
            end: 0.01,
            anneal_steps,
        }
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        if t >= self.anneal_steps {
            return self.end;
        }
        let frac = t as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Maps a uniform draw in [0,1) to an index in 0..n.
pub(crate) fn uniform_index(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n - 1)
}

/// ε-greedy choice: with probability ε a uniformly random action (which may
/// coincide with the greedy one), otherwise the argmax of `values`.
///
/// Always consumes exactly two uniforms, and `values` is only evaluated on the
/// greedy branch.
pub fn epsilon_greedy<R, F>(num_actions: usize, epsilon: f64, rng: &mut R, values: F) -> Result<usize>
where
    R: Rng + ?Sized,
    F: FnOnce() -> Result<Vec<f64>>,
{
    let u: f64 = rng.random();
    let pick: f64 = rng.random();
    if u < epsilon {
        Ok(uniform_index(pick, num_actions))
    } else {
        let v = values()?;
        if v.len() != num_actions {
            return Err(Error::Shape(format!(
                "{} action values for {num_actions} actions",
                v.len()
            )));
        }
        Ok(argmax(&v))
    }
}

/// Probability that ε-greedy over `n` actions returns the argmax.
pub fn greedy_probability(n: usize, epsilon: f64) -> f64 {
    1.0 - (n as f64 - 1.0) * epsilon / n as f64
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    /// Step size of both networks' Adam optimizers.
    pub lr: f64,
    /// α0, step size of the average-reward estimate.
    pub avg_lr: f64,
    pub batch_size: usize,
    /// T0, training iterations between target syncs.
    pub sync_every: u64,
    pub clip_norm: f64,
    pub hidden: Vec<usize>,
}

impl Hyper {
    pub fn reference(variant: &AgentVariant) -> Self {
        Self {
            lr: 5e-4,
            avg_lr: 5e-4,
            batch_size: 64,
            sync_every: 2000,
            clip_norm: CLIP_NORM,
            hidden: variant.default_hidden(),
        }
    }
}

/// Diagnostics of one training iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub loss: f64,
    pub td_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub variant: AgentVariant,
    pub hyper: Hyper,
    pub online: Network,
    pub target: Network,
    pub optimizer: Vec<AdamState>,
    /// Ū; only moves for the average-reward family.
    pub avg_reward: f64,
    /// Completed training iterations.
    pub train_steps: u64,
}

impl Agent {
    /// He-initialized online network with an identical target copy.
    pub fn new<R: Rng + ?Sized>(
        variant: AgentVariant,
        hyper: Hyper,
        state_dim: usize,
        num_actions: usize,
        initial_avg_reward: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let online = Network::he_init(variant.dueling, state_dim, &hyper.hidden, num_actions, rng)?;
        Self::from_network(variant, hyper, online, initial_avg_reward)
    }

    pub fn from_network(variant: AgentVariant, hyper: Hyper, online: Network, initial_avg_reward: f64) -> Result<Self> {
        if online.is_dueling() != variant.dueling {
            return Err(Error::InvalidArgument(format!(
                "{variant} does not match the supplied architecture"
            )));
        }
        if !initial_avg_reward.is_finite() {
            return Err(Error::InvalidArgument("initial average reward must be finite".into()));
        }
        Ok(Self {
            variant,
            hyper,
            optimizer: online.new_optimizer(),
            target: online.clone(),
            online,
            avg_reward: initial_avg_reward,
            train_steps: 0,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.online.actions()
    }

    pub fn action_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.online.predict(state)
    }

    /// ε-greedy action on the online network.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
        epsilon_greedy(self.num_actions(), epsilon, rng, || self.action_values(state))
    }

    /// TD target from a reward and the target network's best next value.
    pub fn target_value(&self, reward: f64, next_max: f64) -> f64 {
        match self.variant.family {
            Family::AverageReward => reward - self.avg_reward + next_max,
            Family::Discounted { gamma } => reward + gamma * next_max,
        }
    }

    /// Targets for every tuple of a minibatch.
    pub fn compute_targets(&self, batch: &Minibatch) -> Result<Vec<f64>> {
        let next = self.target.predict_batch(batch.next_states.view())?;
        Ok(next
            .rows()
            .into_iter()
            .zip(&batch.rewards)
            .map(|(row, &u)| {
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                self.target_value(u, best)
            })
            .collect())
    }

    /// One iteration: sample, compute TD errors on the taken actions, move Ū
    /// (average-reward family), then one clipped Adam step on the online
    /// network. Does not sync the target.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<TrainStats> {
        let batch = buffer.sample_minibatch(self.hyper.batch_size, rng)?;
        self.train_on(&batch)
    }

    pub fn train_on(&mut self, batch: &Minibatch) -> Result<TrainStats> {
        let targets = self.compute_targets(batch)?;
        let (out, cache) = self.online.forward(batch.states.view())?;
        let n = batch.len();
        let deltas: Vec<f64> = (0..n)
            .map(|i| targets[i] - out[[i, batch.actions[i]]])
            .collect();
        let td_sum: f64 = deltas.iter().sum();
        if let Family::AverageReward = self.variant.family {
            self.avg_reward += self.hyper.avg_lr * td_sum;
        }
        let loss = deltas.iter().map(|d| d * d).sum::<f64>() / n as f64;
        let mut grad_out = Array2::zeros(out.dim());
        for (i, d) in deltas.iter().enumerate() {
            grad_out[[i, batch.actions[i]]] = -2.0 * d / n as f64;
        }
        let grads = self.online.backward(&cache, grad_out.view())?;
        self.online
            .apply_gradients(grads, &mut self.optimizer, self.hyper.lr, self.hyper.clip_norm)?;
        self.train_steps += 1;
        Ok(TrainStats { loss, td_sum })
    }

    /// Copies the online network into the target when the iteration counter
    /// is a positive multiple of T0. Returns whether it synced.
    pub fn maybe_sync_target(&mut self) -> bool {
        let due = self.train_steps > 0 && self.train_steps.is_multiple_of(self.hyper.sync_every);
        if due {
            self.sync_target();
        }
        due
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }

    /// Read-only policy over the target network.
    pub fn policy(&self, epsilon: f64, aoi_max: u32) -> NetworkPolicy {
        NetworkPolicy {
            net: self.target.clone(),
            epsilon,
            aoi_max,
        }
    }

    /// Text checkpoint: a header (variant, γ, Ū, t) followed by the online
    /// and target networks in the parameter format of [`crate::nn`], then the
    /// Adam moments.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dsu-agent 1");
        let _ = writeln!(s, "variant {}", self.variant.name());
        match self.variant.gamma() {
            Some(g) => {
                let _ = writeln!(s, "gamma {g:e}");
            }
            None => s.push_str("gamma none\n"),
        }
        let _ = writeln!(s, "avg_reward {:e}", self.avg_reward);
        let _ = writeln!(s, "train_steps {}", self.train_steps);
        s.push_str("online ");
        self.online.write(&mut s);
        s.push_str("target ");
        self.target.write(&mut s);
        let _ = writeln!(s, "adam {}", self.optimizer.len());
        for opt in &self.optimizer {
            let _ = writeln!(s, "step {}", opt.step);
            crate::nn::write_mlp(&mut s, &opt.first);
            crate::nn::write_mlp(&mut s, &opt.second);
        }
        s
    }

    /// Restores a checkpoint written by [`Agent::to_text`]; hidden widths are
    /// taken from the file, the rest of `hyper` from the argument.
    pub fn from_text(text: &str, mut hyper: Hyper) -> Result<Self> {
        let mut t = Tokens::new(text, "agent checkpoint");
        let version: u32 = t.field("dsu-agent")?;
        if version != 1 {
            return Err(Error::Format {
                what: "agent checkpoint",
                detail: format!("unsupported version {version}"),
            });
        }
        let name: String = t.field("variant")?;
        let gamma = match t.field::<String>("gamma")?.as_str() {
            "none" => None,
            g => Some(g.parse::<f64>().map_err(|_| Error::Format {
                what: "agent checkpoint",
                detail: format!("bad gamma `{g}`"),
            })?),
        };
        let variant = AgentVariant::parse(&name, gamma)?;
        let avg_reward = t.field("avg_reward")?;
        let train_steps = t.field("train_steps")?;
        t.expect("online")?;
        let online = Network::read(&mut t)?;
        t.expect("target")?;
        let target = Network::read(&mut t)?;
        let count: usize = t.field("adam")?;
        let mut optimizer = Vec::with_capacity(count);
        for _ in 0..count {
            let step = t.field("step")?;
            let first = crate::nn::read_mlp(&mut t)?;
            let second = crate::nn::read_mlp(&mut t)?;
            let mut st = AdamState::new(&first);
            st.first = first;
            st.second = second;
            st.step = step;
            optimizer.push(st);
        }
        if !t.is_done() {
            return Err(Error::Format {
                what: "agent checkpoint",
                detail: "trailing data".into(),
            });
        }
        let parts = online.parts();
        let shapes_ok = parts.len() == optimizer.len()
            && target.parts().len() == parts.len()
            && parts
                .iter()
                .zip(target.parts())
                .zip(&optimizer)
                .all(|((p, q), o): ((&&Mlp, &Mlp), &AdamState)| {
                    p.same_shape(q) && p.same_shape(&o.first) && p.same_shape(&o.second)
                });
        if !shapes_ok || online.is_dueling() != variant.dueling || target.is_dueling() != variant.dueling {
            return Err(Error::Format {
                what: "agent checkpoint",
                detail: "network shapes are inconsistent".into(),
            });
        }
        let sizes = parts[0].sizes();
        hyper.hidden = sizes[1..sizes.len() - 1].to_vec();
        Ok(Self {
            variant,
            hyper,
            online,
            target,
            optimizer,
            avg_reward,
            train_steps,
        })
    }
}
