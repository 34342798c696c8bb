//! Caching-enabled IoT network simulator.
//!
//! One ECN caches the latest packet of each of K sensors and serves N users.
//! At the start of every step the ECN activates at most M sensors; each
//! activated sensor delivers a fresh packet with probability 1 − p_O^k. Users
//! that requested a sensor in the step are synchronized with the cache. The
//! step lasts 1, D_u, D_d or D_u + D_d slots depending on whether any request
//! arrived and any sensor was activated, and its AoI cost is amortized over
//! those slots.

mod action;
mod config;
pub mod dynamics;

pub use action::{Action, ActionSpace};
pub use config::{default_fail_prob, EnvConfig, DEFAULT_TX_POWER_MW, MAX_SENSORS};
pub use dynamics::{
    aoi_cost, energy_cost, next_ecn_aoi, next_user_aoi, per_slot_aoi, sample_channel,
    sample_requests, step_duration,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose, RngSnapshot, SimRng};

/// Requests of one step: for each user, the sensor it asked for, if any.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryProfile {
    sensors: usize,
    requests: Vec<Option<usize>>,
}

impl QueryProfile {
    pub fn from_requests(sensors: usize, requests: Vec<Option<usize>>) -> Self {
        debug_assert!(requests.iter().flatten().all(|&k| k < sensors));
        Self { sensors, requests }
    }

    pub fn none(sensors: usize, users: usize) -> Self {
        Self::from_requests(sensors, vec![None; users])
    }

    /// Sensor requested by user `n` (0-based).
    pub fn request(&self, user: usize) -> Option<usize> {
        self.requests[user]
    }

    /// r_n^k with 0-based `user` and `sensor`.
    pub fn r(&self, user: usize, sensor: usize) -> bool {
        self.requests[user] == Some(sensor)
    }

    pub fn any(&self) -> bool {
        self.requests.iter().any(Option::is_some)
    }

    pub fn users(&self) -> usize {
        self.requests.len()
    }

    /// The N×K binary matrix.
    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        self.requests
            .iter()
            .map(|r| (0..self.sensors).map(|k| u8::from(*r == Some(k))).collect())
            .collect()
    }
}

/// AoI seen at the ECN (row 0) and at each user (rows 1..=N), in slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    sensors: usize,
    users: usize,
    aoi: Vec<u32>,
}

impl EnvState {
    pub fn zeros(sensors: usize, users: usize) -> Self {
        Self {
            sensors,
            users,
            aoi: vec![0; sensors * (users + 1)],
        }
    }

    /// Builds a state from row-major AoI values (ECN row first).
    pub fn from_rows(sensors: usize, users: usize, aoi: Vec<u32>) -> Result<Self> {
        if aoi.len() != sensors * (users + 1) {
            return Err(Error::Shape(format!(
                "state has {} entries, expected {}",
                aoi.len(),
                sensors * (users + 1)
            )));
        }
        Ok(Self {
            sensors,
            users,
            aoi,
        })
    }

    /// Δ_m^k for node `m` (0 = ECN, n = user n) and 0-based sensor `k`.
    pub fn get(&self, node: usize, sensor: usize) -> u32 {
        self.aoi[node * self.sensors + sensor]
    }

    pub fn set(&mut self, node: usize, sensor: usize, value: u32) {
        self.aoi[node * self.sensors + sensor] = value;
    }

    pub fn ecn_row(&self) -> &[u32] {
        &self.aoi[..self.sensors]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.aoi
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Row-major flattening scaled by `1/aoi_max`, ECN row first.
    pub fn encode(&self, aoi_max: u32) -> Vec<f64> {
        encode_state(self, aoi_max)
    }
}

pub fn encode_state(state: &EnvState, aoi_max: u32) -> Vec<f64> {
    let scale = f64::from(aoi_max);
    state.aoi.iter().map(|&d| f64::from(d) / scale).collect()
}

/// Everything produced by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    /// D, in slots.
    pub duration: u32,
    /// z_k, whether sensor k's update reached the ECN.
    pub success: Vec<bool>,
    pub query: QueryProfile,
    pub cost_aoi: f64,
    /// mJ.
    pub cost_energy: f64,
}

/// Initial state: every AoI is zero.
pub fn reset(config: &EnvConfig) -> EnvState {
    EnvState::zeros(config.sensors, config.users)
}

/// Deterministic part of a step, given the sampled requests and channel
/// outcome.
pub fn transition(
    state: &EnvState,
    action: Action,
    query: &QueryProfile,
    success: &[bool],
    config: &EnvConfig,
) -> StepOutcome {
    let k = config.sensors;
    let d = step_duration(query, action, config.sup_slots, config.ddp_slots);
    let mut next = state.clone();
    debug_assert_eq!(success.len(), k);
    for (s, &ok) in success.iter().enumerate() {
        next.set(0, s, next_ecn_aoi(state.get(0, s), ok, d, config.aoi_max));
    }
    for n in 1..=config.users {
        for s in 0..k {
            let v = next_user_aoi(
                state.get(n, s),
                next.get(0, s),
                query.r(n - 1, s),
                d,
                config.aoi_max,
            );
            next.set(n, s, v);
        }
    }
    let cost_aoi = aoi_cost(state, &next, d, config);
    let cost_energy = energy_cost(action, config);
    let reward = -(config.beta_aoi * cost_aoi + config.beta_energy * cost_energy);
    StepOutcome {
        next_state: next,
        reward,
        duration: d,
        success: success.to_vec(),
        query: query.clone(),
        cost_aoi,
        cost_energy,
    }
}

/// Random streams driving the environment: requests and channel draws come
/// from separate streams.
#[derive(Debug, Clone)]
pub struct EnvRng {
    pub requests: SimRng,
    pub channel: SimRng,
}

impl EnvRng {
    pub fn training(seed: u64) -> Self {
        Self {
            requests: rng::stream(seed, Purpose::Requests, 0),
            channel: rng::stream(seed, Purpose::Channel, 0),
        }
    }

    /// Streams of the `index`-th evaluation run under `seed`.
    pub fn evaluation(seed: u64, index: u32) -> Self {
        Self {
            requests: rng::stream(seed, Purpose::EvalRequests, index),
            channel: rng::stream(seed, Purpose::EvalChannel, index),
        }
    }

    pub fn snapshot(&self) -> [RngSnapshot; 2] {
        [
            RngSnapshot::capture(&self.requests),
            RngSnapshot::capture(&self.channel),
        ]
    }

    pub fn restore(snap: &[RngSnapshot; 2]) -> Self {
        Self {
            requests: snap[0].restore(),
            channel: snap[1].restore(),
        }
    }
}

/// Samples the requests, then the channel, and applies [`transition`].
pub fn step(
    state: &EnvState,
    action: Action,
    config: &EnvConfig,
    rng: &mut EnvRng,
) -> Result<StepOutcome> {
    if action.count() as usize > config.max_updates {
        return Err(Error::InvalidAction(format!(
            "{} sensors activated, at most {} allowed",
            action.count(),
            config.max_updates
        )));
    }
    if action.bits() >> config.sensors != 0 {
        return Err(Error::InvalidAction(format!(
            "action {:#b} activates a sensor beyond K={}",
            action.bits(),
            config.sensors
        )));
    }
    let query = sample_requests(config, &mut rng.requests);
    let success = sample_channel(action, config, &mut rng.channel);
    Ok(transition(state, action, &query, &success, config))
}

/// A configured network with its current state and random streams.
#[derive(Debug, Clone)]
pub struct Environment {
    config: Arc<EnvConfig>,
    actions: Arc<ActionSpace>,
    state: EnvState,
    rng: EnvRng,
}

impl Environment {
    pub fn new(config: Arc<EnvConfig>, rng: EnvRng) -> Result<Self> {
        config.validate()?;
        let actions = Arc::new(ActionSpace::enumerate(config.sensors, config.max_updates)?);
        Ok(Self::with_actions(config, actions, rng))
    }

    /// Skips re-enumerating the action space; `actions` must match `config`.
    pub fn with_actions(config: Arc<EnvConfig>, actions: Arc<ActionSpace>, rng: EnvRng) -> Self {
        let state = reset(&config);
        Self {
            config,
            actions,
            state,
            rng,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn rng(&self) -> &EnvRng {
        &self.rng
    }

    pub fn reset(&mut self) -> &EnvState {
        self.state = reset(&self.config);
        &self.state
    }

    /// Replaces the current state and random streams (checkpoint restore).
    pub fn restore(&mut self, state: EnvState, rng: EnvRng) -> Result<()> {
        if state.sensors != self.config.sensors || state.users != self.config.users {
            return Err(Error::Shape("state does not match configuration".into()));
        }
        self.state = state;
        self.rng = rng;
        Ok(())
    }

    /// Takes the action with the given index and advances the state.
    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome> {
        let action = self.actions.get(action_index)?;
        let out = step(&self.state, action, &self.config, &mut self.rng)?;
        self.state = out.next_state.clone();
        Ok(out)
    }

    pub fn encoded_state(&self) -> Vec<f64> {
        self.state.encode(self.config.aoi_max)
    }
}
