use rand::Rng;

use crate::agents::network::Network;
use crate::agents::{epsilon_greedy, uniform_index};
use crate::env::{ActionSpace, EnvState};
use crate::error::Result;
use crate::rng::SimRng;

/// Anything that maps an environment state to an action index.
pub trait Controller {
    fn decide(&self, state: &EnvState, space: &ActionSpace, rng: &mut SimRng) -> Result<usize>;
}

/// Activates the `M` sensors with the stalest ECN copies, lowest index first
/// on ties.
pub fn greedy_action(state: &EnvState, space: &ActionSpace) -> Result<usize> {
    let ecn = state.ecn_row();
    let mut order: Vec<usize> = (0..ecn.len()).collect();
    order.sort_by(|&a, &b| ecn[b].cmp(&ecn[a]).then(a.cmp(&b)));
    let bits = order
        .iter()
        .take(space.max_updates())
        .fold(0u32, |acc, &k| acc | 1 << k);
    Ok(space.from_bits(bits)?.index())
}

/// Uniform over the whole action space, idle action included. One uniform
/// per call.
pub fn random_action<R: Rng + ?Sized>(space: &ActionSpace, rng: &mut R) -> usize {
    uniform_index(rng.random(), space.len())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPolicy;

impl Controller for GreedyPolicy {
    fn decide(&self, state: &EnvState, space: &ActionSpace, _rng: &mut SimRng) -> Result<usize> {
        greedy_action(state, space)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Controller for RandomPolicy {
    fn decide(&self, _state: &EnvState, space: &ActionSpace, rng: &mut SimRng) -> Result<usize> {
        Ok(random_action(space, rng))
    }
}

/// ε-greedy over a frozen network.
#[derive(Debug, Clone)]
pub struct NetworkPolicy {
    pub net: Network,
    pub epsilon: f64,
    pub aoi_max: u32,
}

impl Controller for NetworkPolicy {
    fn decide(&self, state: &EnvState, space: &ActionSpace, rng: &mut SimRng) -> Result<usize> {
        epsilon_greedy(space.len(), self.epsilon, rng, || {
            self.net.predict(&state.encode(self.aoi_max))
        })
    }
}
