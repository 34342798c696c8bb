//! Fixed-capacity FIFO experience replay.

use ndarray::Array2;
use rand::Rng;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// One transition (S, A, U, S').
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// A sampled minibatch laid out for batched forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Ring buffer of experiences. Storage grows on demand up to `capacity`, after
/// which each push overwrites the oldest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    num_actions: usize,
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<u32>,
    rewards: Vec<f64>,
    // slot the next push writes to
    head: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, num_actions: usize) -> Result<Self> {
        if capacity == 0 || state_dim == 0 || num_actions == 0 {
            return Err(Error::InvalidArgument(format!(
                "replay capacity, state width and action count must be positive \
                 (got {capacity}, {state_dim}, {num_actions})"
            )));
        }
        Ok(Self {
            capacity,
            state_dim,
            num_actions,
            states: Vec::new(),
            next_states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            head: 0,
            pushed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Total pushes since creation, evictions included.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, exp: &Experience) -> Result<()> {
        self.push_parts(&exp.state, exp.action, exp.reward, &exp.next_state)
    }

    pub fn push_parts(&mut self, state: &[f64], action: usize, reward: f64, next_state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim || next_state.len() != self.state_dim {
            return Err(Error::Shape(format!(
                "experience states have widths {} and {}, buffer expects {}",
                state.len(),
                next_state.len(),
                self.state_dim
            )));
        }
        if action >= self.num_actions {
            return Err(Error::InvalidAction(format!(
                "action index {action} outside 0..{}",
                self.num_actions
            )));
        }
        let d = self.state_dim;
        if self.len() < self.capacity {
            self.states.extend_from_slice(state);
            self.next_states.extend_from_slice(next_state);
            self.actions.push(action as u32);
            self.rewards.push(reward);
        } else {
            let at = self.head;
            self.states[at * d..(at + 1) * d].copy_from_slice(state);
            self.next_states[at * d..(at + 1) * d].copy_from_slice(next_state);
            self.actions[at] = action as u32;
            self.rewards[at] = reward;
        }
        self.head = (self.head + 1) % self.capacity;
        self.pushed += 1;
        Ok(())
    }

    /// Storage slot of the `i`-th oldest experience.
    fn slot(&self, i: usize) -> usize {
        if self.len() < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        }
    }

    /// The `i`-th oldest stored experience.
    pub fn get(&self, i: usize) -> Option<Experience> {
        (i < self.len()).then(|| self.at_slot(self.slot(i)))
    }

    fn at_slot(&self, s: usize) -> Experience {
        let d = self.state_dim;
        Experience {
            state: self.states[s * d..(s + 1) * d].to_vec(),
            action: self.actions[s] as usize,
            reward: self.rewards[s],
            next_state: self.next_states[s * d..(s + 1) * d].to_vec(),
        }
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = Experience> + '_ {
        (0..self.len()).map(|i| self.at_slot(self.slot(i)))
    }

    /// `n` distinct positions (oldest-first numbering), uniform without
    /// replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if n > self.len() {
            return Err(Error::BufferUnderflow {
                available: self.len(),
                requested: n,
            });
        }
        Ok(rand::seq::index::sample(rng, self.len(), n).into_vec())
    }

    pub fn sample_minibatch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Minibatch> {
        let picks = self.sample_indices(n, rng)?;
        let d = self.state_dim;
        let mut states = Array2::zeros((n, d));
        let mut next_states = Array2::zeros((n, d));
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        for (row, &i) in picks.iter().enumerate() {
            let s = self.slot(i);
            states
                .row_mut(row)
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&self.states[s * d..(s + 1) * d]);
            next_states
                .row_mut(row)
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&self.next_states[s * d..(s + 1) * d]);
            actions.push(self.actions[s] as usize);
            rewards.push(self.rewards[s]);
        }
        Ok(Minibatch {
            states,
            actions,
            rewards,
            next_states,
        })
    }

    pub fn encode(&self, w: &mut Writer) {
        w.usize(self.capacity);
        w.usize(self.state_dim);
        w.usize(self.num_actions);
        w.usize(self.head);
        w.u64(self.pushed);
        w.f64s(&self.states);
        w.f64s(&self.next_states);
        w.u32s(&self.actions);
        w.f64s(&self.rewards);
    }

    pub fn decode(r: &mut Reader) -> Result<Self> {
        let mut buf = Self::new(r.usize()?, r.usize()?, r.usize()?)?;
        buf.head = r.usize()?;
        buf.pushed = r.u64()?;
        buf.states = r.f64s()?;
        buf.next_states = r.f64s()?;
        buf.actions = r.u32s()?;
        buf.rewards = r.f64s()?;
        let n = buf.actions.len();
        let consistent = n <= buf.capacity
            && buf.head < buf.capacity
            && buf.rewards.len() == n
            && buf.states.len() == n * buf.state_dim
            && buf.next_states.len() == n * buf.state_dim
            && buf.actions.iter().all(|&a| (a as usize) < buf.num_actions);
        if !consistent {
            return Err(Error::Format {
                what: "checkpoint",
                detail: "inconsistent replay buffer".into(),
            });
        }
        Ok(buf)
    }
}
