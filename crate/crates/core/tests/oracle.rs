use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dsu_core::agents::Controller;
use dsu_core::env::{ActionSpace, EnvConfig, EnvRng, EnvState, Environment};
use dsu_core::harness::{evaluate_controller, tiny_env};
use dsu_core::oracle::{
    enumerate_transitions, evaluate_policy, recurrent_classes, relative_value_iteration, solve,
    OracleReport, TransitionModel, STATE_BOUND,
};
use dsu_core::rng::SimRng;
use dsu_core::Result;

/// Largest |g + h(s) - r(s, π(s)) - Σ p h(s')| over the states.
fn poisson_residual(model: &TransitionModel, policy: &[usize], gain: f64, bias: &[f64]) -> f64 {
    (0..model.len())
        .map(|s| {
            let a = policy[s];
            let expect: f64 = model.branches(s, a).iter().map(|b| b.prob * bias[b.next]).sum();
            (gain + bias[s] - model.expected_reward(s, a) - expect).abs()
        })
        .fold(0.0, f64::max)
}

fn two_sensor_env() -> EnvConfig {
    let mut c = EnvConfig::paper(2, 1);
    c.aoi_max = 6;
    c.beta_energy = 0.05;
    c
}

#[test]
fn policy_evaluation_agrees_with_value_iteration() {
    for c in [tiny_env(), two_sensor_env()] {
        let model = enumerate_transitions(&c, STATE_BOUND).unwrap();
        let rvi = relative_value_iteration(&model, 1e-12, 1_000_000).unwrap();
        let (gain, bias) = evaluate_policy(&model, &rvi.policy).unwrap();
        assert!((gain - rvi.gain).abs() < 1e-8, "{gain} vs {}", rvi.gain);
        assert!(poisson_residual(&model, &rvi.policy, gain, &bias) < 1e-8);
        assert!(poisson_residual(&model, &rvi.policy, rvi.gain, &rvi.bias) < 1e-8);
        assert_eq!(recurrent_classes(&model, &rvi.policy), 1);

        // no other deterministic policy does better: a one-step improvement
        // from the optimal bias never gains
        for s in 0..model.len() {
            for a in 0..model.num_actions() {
                let q = model.expected_reward(s, a)
                    + model.branches(s, a).iter().map(|b| b.prob * rvi.bias[b.next]).sum::<f64>();
                assert!(q <= rvi.gain + rvi.bias[s] + 1e-8);
            }
        }
    }
}

struct TablePolicy {
    by_state: HashMap<Vec<u32>, usize>,
}

impl Controller for TablePolicy {
    fn decide(&self, state: &EnvState, _: &ActionSpace, _: &mut SimRng) -> Result<usize> {
        Ok(self.by_state[state.as_slice()])
    }
}

#[test]
fn optimal_policy_simulates_to_its_gain() {
    let c = two_sensor_env();
    let report = solve(&c, 1e-12, 1_000_000).unwrap();
    let policy = TablePolicy {
        by_state: report.states.iter().map(|e| (e.aoi.clone(), e.action)).collect(),
    };
    let m = evaluate_controller(&policy, &c, 2_000_000, 5, 0).unwrap();
    let rel = (m.avg_reward - report.gain).abs() / report.gain.abs();
    assert!(rel < 0.005, "simulated {} vs {}", m.avg_reward, report.gain);

    let back = OracleReport::from_json(&report.to_json()).unwrap();
    assert_eq!(back, report);
}

struct UpdateAll(usize);

impl Controller for UpdateAll {
    fn decide(&self, _: &EnvState, _: &ActionSpace, _: &mut SimRng) -> Result<usize> {
        Ok(self.0)
    }
}

fn free_lossless(sensors: usize, request_prob: f64) -> EnvConfig {
    let mut c = EnvConfig::paper(sensors, 1);
    c.aoi_max = 8;
    c.max_updates = sensors;
    c.fail_prob = vec![0.0; sensors];
    c.request_prob = vec![request_prob];
    c.beta_energy = 0.0;
    c
}

/// Optimal gain and the gain of activating every sensor at every step.
fn always_update_gap(c: &EnvConfig) -> (f64, f64, usize) {
    let model = enumerate_transitions(c, STATE_BOUND).unwrap();
    let rvi = relative_value_iteration(&model, 1e-12, 1_000_000).unwrap();
    let space = ActionSpace::enumerate(c.sensors, c.max_updates).unwrap();
    let all = space.from_bits((1 << c.sensors) - 1).unwrap().index();
    let (gain, _) = evaluate_policy(&model, &vec![all; model.len()]).unwrap();
    (rvi.gain, gain, all)
}

#[test]
fn free_energy_always_update_attains_minimum_aoi_cost() {
    let c = free_lossless(1, 1.0);
    let (optimum, gain, all) = always_update_gap(&c);
    assert!((gain - optimum).abs() < 1e-9, "always-update {gain} vs optimum {optimum}");
    let m = evaluate_controller(&UpdateAll(all), &c, 10_000, 9, 0).unwrap();
    assert!((m.ae - c.update_energy(0)).abs() < 1e-12);
    // the first step starts from zero AoI
    assert!((m.aa + optimum).abs() < 1e-3, "AA {} vs {}", m.aa, -optimum);
}

#[test]
fn always_update_is_beaten_when_steps_can_be_idle() {
    // without a request, skipping the update keeps the step at one slot
    for c in [free_lossless(1, 0.6), free_lossless(2, 0.6)] {
        let (optimum, gain, _) = always_update_gap(&c);
        assert!(optimum > gain + 0.05, "optimum {optimum}, always-update {gain}");
    }
}

#[test]
fn enumerated_states_are_reachable_from_reset() {
    let c = two_sensor_env();
    let model = enumerate_transitions(&c, STATE_BOUND).unwrap();
    assert_eq!(model.label(0).unwrap(), EnvState::zeros(2, 1).as_slice());
    let mut env = Environment::new(Arc::new(c), EnvRng::training(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = env.actions().len();
    let mut seen = vec![false; model.len()];
    seen[0] = true;
    // transient start-up states are only seen right after a reset
    for t in 0..200_000 {
        if t % 25 == 0 {
            env.reset();
        }
        let a = rand::Rng::random_range(&mut rng, 0..n);
        let out = env.step(a).unwrap();
        let s = model.find(out.next_state.as_slice()).expect("sampled state is enumerated");
        seen[s] = true;
    }
    assert!(seen.iter().all(|&v| v), "some enumerated states were never visited");
}
