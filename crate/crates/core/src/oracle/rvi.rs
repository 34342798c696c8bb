use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::model::TransitionModel;

/// Self-loop weight of the aperiodicity transform P' = τP + (1 − τ)I. It
/// keeps the gain and scales the bias by 1/τ.
const TAU: f64 = 0.5;

/// Solution of the average-reward optimality equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RviResult {
    /// Optimal average reward per step.
    pub gain: f64,
    /// Relative values, zero at the reference state 0.
    pub bias: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Span of the last Bellman update difference.
    pub residual: f64,
}

fn q_value(model: &TransitionModel, h: &[f64], s: usize, a: usize) -> f64 {
    model
        .branches(s, a)
        .iter()
        .map(|b| b.prob * (b.reward + h[b.next]))
        .sum()
}

/// Best action under `h`; near-ties go to the lowest index.
fn best_action(model: &TransitionModel, h: &[f64], s: usize) -> (usize, f64) {
    let values: Vec<f64> = (0..model.num_actions()).map(|a| q_value(model, h, s, a)).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-12 * max.abs().max(1.0);
    let a = values.iter().position(|&v| v >= max - slack).expect("non-empty");
    (a, max)
}

/// Relative value iteration anchored at state 0, run on the aperiodic
/// transform of `model`. Stops once the span of `T h − h` is at most `tol`.
pub fn relative_value_iteration(model: &TransitionModel, tol: f64, max_iter: usize) -> Result<RviResult> {
    let n = model.len();
    let mut h = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let th: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|s| {
                let best = (0..model.num_actions())
                    .map(|a| {
                        let expect: f64 = model
                            .branches(s, a)
                            .iter()
                            .map(|b| b.prob * (b.reward + TAU * h[b.next]))
                            .sum();
                        expect + (1.0 - TAU) * h[s]
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                best
            })
            .collect();
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .map(|(t, x)| t - x)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        residual = hi - lo;
        let anchor = th[0];
        h = th.iter().map(|t| t - anchor).collect();
        if residual <= tol {
            let bias: Vec<f64> = h.iter().map(|x| TAU * x).collect();
            let policy = (0..n).map(|s| best_action(model, &bias, s).0).collect();
            return Ok(RviResult {
                gain: 0.5 * (lo + hi),
                bias,
                policy,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Gain and bias (zero at state 0) of a fixed policy, from the linear system
/// g + h(s) = r(s, π(s)) + Σ p h(s'), h(0) = 0.
pub fn evaluate_policy(model: &TransitionModel, policy: &[usize]) -> Result<(f64, Vec<f64>)> {
    let n = model.len();
    if policy.len() != n || policy.iter().any(|&a| a >= model.num_actions()) {
        return Err(Error::InvalidArgument("policy does not fit the model".into()));
    }
    // unknowns: x[0] = g, x[s] = h(s) for s ≥ 1
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..n {
        a[(s, 0)] += 1.0;
        if s > 0 {
            a[(s, s)] += 1.0;
        }
        for br in model.branches(s, policy[s]) {
            if br.next > 0 {
                a[(s, br.next)] -= br.prob;
            }
        }
        b[s] = model.expected_reward(s, policy[s]);
    }
    let x = a.lu().solve(&b).ok_or_else(|| {
        Error::InvalidArgument("policy evaluation system is singular (policy is not unichain)".into())
    })?;
    let mut h = x.as_slice().to_vec();
    let g = h[0];
    h[0] = 0.0;
    Ok((g, h))
}

/// Number of closed communicating classes of the chain induced by `policy`;
/// the chain is unichain when this is 1.
pub fn recurrent_classes(model: &TransitionModel, policy: &[usize]) -> usize {
    let mut graph = DiGraph::<(), ()>::with_capacity(model.len(), 0);
    let nodes: Vec<_> = (0..model.len()).map(|_| graph.add_node(())).collect();
    for (s, &a) in policy.iter().enumerate() {
        for b in model.branches(s, a) {
            if b.prob > 0.0 {
                graph.add_edge(nodes[s], nodes[b.next], ());
            }
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; model.len()];
    for (c, members) in sccs.iter().enumerate() {
        for m in members {
            component[m.index()] = c;
        }
    }
    sccs.iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|m| {
                graph
                    .neighbors(*m)
                    .all(|next| component[next.index()] == *c)
            })
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::model::Branch;

    fn det(next: usize, reward: f64) -> Vec<Branch> {
        vec![Branch {
            prob: 1.0,
            reward,
            next,
        }]
    }

    #[test]
    fn single_state() {
        let m = TransitionModel::from_branches(2, vec![det(0, -3.0), det(0, -3.0)]).unwrap();
        let r = relative_value_iteration(&m, 1e-10, 1000).unwrap();
        assert!((r.gain + 3.0).abs() < 1e-10);
        assert_eq!(r.policy, vec![0]);
    }

    #[test]
    fn periodic_cycle() {
        let m = TransitionModel::from_branches(1, vec![det(1, 2.0), det(0, -6.0)]).unwrap();
        let r = relative_value_iteration(&m, 1e-10, 10_000).unwrap();
        assert!((r.gain + 2.0).abs() < 1e-9);
        let (g, h) = evaluate_policy(&m, &r.policy).unwrap();
        assert!((g + 2.0).abs() < 1e-12);
        assert!((h[1] - r.bias[1]).abs() < 1e-8);
        assert_eq!(recurrent_classes(&m, &r.policy), 1);
    }

    #[test]
    fn picks_better_action() {
        // action 1 in state 0 jumps to a rewarding absorbing state
        let m = TransitionModel::from_branches(
            2,
            vec![det(0, 0.0), det(1, -1.0), det(1, 1.0), det(1, 1.0)],
        )
        .unwrap();
        let r = relative_value_iteration(&m, 1e-10, 10_000).unwrap();
        assert!((r.gain - 1.0).abs() < 1e-9);
        assert_eq!(r.policy, vec![1, 0]);
    }

    #[test]
    fn two_closed_classes() {
        let m = TransitionModel::from_branches(1, vec![det(0, 0.0), det(1, 1.0)]).unwrap();
        assert_eq!(recurrent_classes(&m, &[0, 0]), 2);
        assert!(evaluate_policy(&m, &[0, 0]).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let m = TransitionModel::from_branches(1, vec![det(1, 2.0), det(0, -6.0)]).unwrap();
        assert!(matches!(
            relative_value_iteration(&m, 1e-14, 1),
            Err(Error::NotConverged { iterations: 1, .. })
        ));
    }
}
