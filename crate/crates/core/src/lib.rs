//! Dynamic status update for caching-enabled IoT networks.
//!
//! The crate bundles:
//!
//! * [`env`]: an exact simulator of an edge caching node (ECN) that serves user
//!   requests from cache and decides which sensors to refresh, with time steps
//!   whose length depends on the requests and the update decision;
//! * [`nn`]: a small fully-connected network substrate (He init, backprop,
//!   Adam, gradient clipping, dueling aggregation);
//! * [`replay`]: a FIFO experience replay buffer;
//! * [`agents`]: average-reward (R) and discounted (Q) deep agents in dueling
//!   and single-stream form, plus greedy and random baselines;
//! * [`oracle`]: transition-model enumeration, relative value iteration and
//!   tabular R-learning for instances small enough to solve exactly;
//! * [`harness`]: training loop, periodic evaluation, metrics export and sweeps.

pub mod agents;
pub mod codec;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
