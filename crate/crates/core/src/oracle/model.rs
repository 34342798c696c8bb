use std::collections::{HashMap, VecDeque};

use crate::env::{reset, transition, Action, ActionSpace, EnvConfig, QueryProfile};
use crate::error::{Error, Result};

/// Default cap on the number of enumerated states.
pub const STATE_BOUND: usize = 50_000;

/// One possible outcome of taking an action in a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub reward: f64,
    pub next: usize,
}

/// A finite MDP: states are indexed `0..len`, actions `0..num_actions`, and
/// every (state, action) pair has a list of branches.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    num_actions: usize,
    branches: Vec<Vec<Branch>>,
    /// AoI tuples of the states when the model comes from a network config.
    labels: Vec<Vec<u32>>,
}

impl TransitionModel {
    /// Builds a model from explicit branch lists, indexed `state * num_actions + action`.
    pub fn from_branches(num_actions: usize, branches: Vec<Vec<Branch>>) -> Result<Self> {
        if num_actions == 0 || branches.is_empty() || !branches.len().is_multiple_of(num_actions) {
            return Err(Error::InvalidArgument(format!(
                "{} branch lists do not tile {num_actions} actions",
                branches.len()
            )));
        }
        let n = branches.len() / num_actions;
        for (i, list) in branches.iter().enumerate() {
            let total: f64 = list.iter().map(|b| b.prob).sum();
            let bad_prob = list.iter().any(|b| !(b.prob > 0.0 && b.prob <= 1.0 + 1e-12));
            if (total - 1.0).abs() > 1e-9 || bad_prob || list.iter().any(|b| b.next >= n) {
                return Err(Error::InvalidArgument(format!(
                    "state {} action {}: invalid branch list",
                    i / num_actions,
                    i % num_actions
                )));
            }
        }
        Ok(Self {
            num_actions,
            branches,
            labels: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.branches.len() / self.num_actions
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn branches(&self, state: usize, action: usize) -> &[Branch] {
        &self.branches[state * self.num_actions + action]
    }

    pub fn expected_reward(&self, state: usize, action: usize) -> f64 {
        self.branches(state, action)
            .iter()
            .map(|b| b.prob * b.reward)
            .sum()
    }

    /// AoI tuple of a state, when known.
    pub fn label(&self, state: usize) -> Option<&[u32]> {
        self.labels.get(state).map(Vec::as_slice)
    }

    pub fn find(&self, aoi: &[u32]) -> Option<usize> {
        self.labels.iter().position(|l| l == aoi)
    }
}

/// Every request pattern with its probability.
fn query_outcomes(config: &EnvConfig) -> Vec<(f64, QueryProfile)> {
    let mut partial: Vec<(f64, Vec<Option<usize>>)> = vec![(1.0, Vec::new())];
    for n in 0..config.users {
        let p = config.request_prob[n];
        let mut choices: Vec<(f64, Option<usize>)> = Vec::new();
        if p < 1.0 {
            choices.push((1.0 - p, None));
        }
        for (k, &w) in config.popularity[n].iter().enumerate() {
            if p * w > 0.0 {
                choices.push((p * w, Some(k)));
            }
        }
        partial = partial
            .into_iter()
            .flat_map(|(q, reqs)| {
                choices.iter().map(move |&(c, choice)| {
                    let mut r = reqs.clone();
                    r.push(choice);
                    (q * c, r)
                })
            })
            .collect();
    }
    partial
        .into_iter()
        .map(|(p, r)| (p, QueryProfile::from_requests(config.sensors, r)))
        .collect()
}

/// Every delivery outcome of an action with its probability.
fn channel_outcomes(action: Action, config: &EnvConfig) -> Vec<(f64, Vec<bool>)> {
    let mut out = vec![(1.0, vec![false; config.sensors])];
    for k in (0..config.sensors).filter(|&k| action.is_active(k)) {
        let fail = config.fail_prob[k];
        out = out
            .into_iter()
            .flat_map(|(p, z)| {
                let mut ok = z.clone();
                ok[k] = true;
                [(p * (1.0 - fail), ok), (p * fail, z)]
            })
            .filter(|(p, _)| *p > 0.0)
            .collect();
    }
    out
}

/// Exact transition model of a network config over the states reachable
/// from the all-zero state.
pub fn enumerate_transitions(config: &EnvConfig, bound: usize) -> Result<TransitionModel> {
    config.validate()?;
    let space = ActionSpace::enumerate(config.sensors, config.max_updates)?;
    let queries = query_outcomes(config);
    let channels: Vec<_> = space.iter().map(|a| channel_outcomes(a, config)).collect();

    let start = reset(config);
    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut labels = vec![start.as_slice().to_vec()];
    index.insert(start.as_slice().to_vec(), 0);
    let mut queue = VecDeque::from([start]);
    let mut branches = Vec::new();

    while let Some(state) = queue.pop_front() {
        for action in space.iter() {
            // (next index, reward bits) -> probability; keeps first-seen order
            let mut merged: Vec<Branch> = Vec::new();
            let mut slot: HashMap<(usize, u64), usize> = HashMap::new();
            for (pq, query) in &queries {
                for (pz, success) in &channels[action.index()] {
                    let out = transition(&state, action, query, success, config);
                    let key = out.next_state.as_slice().to_vec();
                    let next = match index.get(&key) {
                        Some(&i) => i,
                        None => {
                            let i = labels.len();
                            if i >= bound {
                                return Err(Error::StateBound { bound });
                            }
                            index.insert(key.clone(), i);
                            labels.push(key);
                            queue.push_back(out.next_state);
                            i
                        }
                    };
                    let prob = pq * pz;
                    match slot.get(&(next, out.reward.to_bits())) {
                        Some(&j) => merged[j].prob += prob,
                        None => {
                            slot.insert((next, out.reward.to_bits()), merged.len());
                            merged.push(Branch {
                                prob,
                                reward: out.reward,
                                next,
                            });
                        }
                    }
                }
            }
            branches.push(merged);
        }
    }
    Ok(TransitionModel {
        num_actions: space.len(),
        branches,
        labels,
    })
}
