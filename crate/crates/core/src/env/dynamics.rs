//! Per-step dynamics: step duration, AoI recursions and costs.
//!
//! All AoI arithmetic is in whole slots and saturates at Δ_max.

use rand::Rng;

use crate::env::action::Action;
use crate::env::config::EnvConfig;
use crate::env::{EnvState, QueryProfile};
use crate::error::{Error, Result};

/// Number of slots in a step.
///
/// | requests | activations | duration  |
/// |----------|-------------|-----------|
/// | yes      | yes         | D_u + D_d |
/// | no       | yes         | D_u       |
/// | yes      | no          | D_d       |
/// | no       | no          | 1         |
pub fn duration(any_request: bool, any_activation: bool, sup_slots: u32, ddp_slots: u32) -> u32 {
    match (any_request, any_activation) {
        (true, true) => sup_slots + ddp_slots,
        (false, true) => sup_slots,
        (true, false) => ddp_slots,
        (false, false) => 1,
    }
}

pub fn step_duration(query: &QueryProfile, action: Action, sup_slots: u32, ddp_slots: u32) -> u32 {
    duration(query.any(), !action.is_idle(), sup_slots, ddp_slots)
}

/// AoI of one sensor at the ECN after a step of `duration` slots.
pub fn next_ecn_aoi(aoi: u32, success: bool, duration: u32, aoi_max: u32) -> u32 {
    if success {
        duration
    } else {
        aoi.saturating_add(duration).min(aoi_max)
    }
}

/// AoI of one sensor at a user after a step. A user that requested the sensor
/// is synchronized with the (already advanced) ECN copy.
pub fn next_user_aoi(
    aoi: u32,
    ecn_next: u32,
    requested: bool,
    duration: u32,
    aoi_max: u32,
) -> u32 {
    if requested {
        ecn_next
    } else {
        aoi.saturating_add(duration).min(aoi_max)
    }
}

/// Instantaneous AoI after slot `slot` (1-based) of a step of `duration` slots.
pub fn per_slot_aoi(current: u32, next: u32, duration: u32, slot: u32, aoi_max: u32) -> Result<u32> {
    if slot == 0 || slot > duration {
        return Err(Error::InvalidArgument(format!(
            "slot {slot} outside 1..={duration}"
        )));
    }
    Ok(if slot == duration {
        next
    } else {
        current.saturating_add(slot).min(aoi_max)
    })
}

/// Sum over the slots of a step of the instantaneous AoI of one sensor.
fn slot_sum(current: u32, next: u32, duration: u32, aoi_max: u32) -> u64 {
    let before_last: u64 = (1..duration)
        .map(|i| u64::from(current.saturating_add(i).min(aoi_max)))
        .sum();
    before_last + u64::from(next)
}

/// Weighted, slot-amortized AoI cost of the step from `state` to `next`.
pub fn aoi_cost(state: &EnvState, next: &EnvState, duration: u32, config: &EnvConfig) -> f64 {
    let k = config.sensors;
    let denom = (k as f64) * f64::from(duration);
    (1..=config.users)
        .map(|n| {
            let total: u64 = (0..k)
                .map(|s| slot_sum(state.get(n, s), next.get(n, s), duration, config.aoi_max))
                .sum();
            config.weights[n - 1] * (total as f64 / denom)
        })
        .sum()
}

/// Energy spent by the activated sensors, Σ_k a_k (E_{k,s} + E_{k,u}).
pub fn energy_cost(action: Action, config: &EnvConfig) -> f64 {
    (0..config.sensors)
        .filter(|&k| action.is_active(k))
        .map(|k| config.update_energy(k))
        .sum()
}

/// Draws the requests of one step. Each user consumes exactly two uniforms
/// whatever the outcome, so the stream stays aligned across policies.
pub fn sample_requests<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> QueryProfile {
    let requests = (0..config.users)
        .map(|n| {
            let u_request: f64 = rng.random();
            let u_sensor: f64 = rng.random();
            (u_request < config.request_prob[n])
                .then(|| pick_sensor(&config.popularity[n], u_sensor))
        })
        .collect();
    QueryProfile::from_requests(config.sensors, requests)
}

fn pick_sensor(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the last partial sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Draws the delivery outcome z. One uniform per sensor, activated or not.
pub fn sample_channel<R: Rng + ?Sized>(action: Action, config: &EnvConfig, rng: &mut R) -> Vec<bool> {
    (0..config.sensors)
        .map(|k| {
            let u: f64 = rng.random();
            action.is_active(k) && u < 1.0 - config.fail_prob[k]
        })
        .collect()
}
