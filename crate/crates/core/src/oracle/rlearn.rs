use rand::Rng;

use crate::agents::argmax;
use crate::oracle::model::TransitionModel;

/// Step sizes and exploration of tabular R-learning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RLearningParams {
    pub steps: u64,
    /// α, action-value step size.
    pub alpha: f64,
    /// α0, average-reward step size.
    pub avg_alpha: f64,
    pub epsilon: f64,
    /// Starting value of Ū.
    pub initial_avg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RLearningResult {
    pub avg_reward: f64,
    /// Row-major `states × actions`.
    pub q: Vec<f64>,
    pub num_actions: usize,
}

impl RLearningResult {
    pub fn greedy_policy(&self) -> Vec<usize> {
        self.q.chunks(self.num_actions).map(argmax).collect()
    }
}

fn sample_branch<R: Rng + ?Sized>(model: &TransitionModel, s: usize, a: usize, rng: &mut R) -> (f64, usize) {
    let u: f64 = rng.random();
    let branches = model.branches(s, a);
    let mut acc = 0.0;
    for b in branches {
        acc += b.prob;
        if u < acc {
            return (b.reward, b.next);
        }
    }
    let last = branches.last().expect("non-empty branch list");
    (last.reward, last.next)
}

/// Classic R-learning simulated on `model` from state 0.
///
/// Q(s,a) ← Q(s,a) + α (r − Ū + max Q(s') − Q(s,a)) on every step; Ū moves
/// by α0 (r − Ū + max Q(s') − max Q(s)) only when the action taken was greedy.
pub fn tabular_r_learning<R: Rng + ?Sized>(
    model: &TransitionModel,
    params: &RLearningParams,
    rng: &mut R,
) -> RLearningResult {
    let na = model.num_actions();
    let mut q = vec![0.0; model.len() * na];
    let mut avg = params.initial_avg;
    let mut s = 0usize;
    for _ in 0..params.steps {
        let row = &q[s * na..(s + 1) * na];
        let greedy = argmax(row);
        let u: f64 = rng.random();
        let pick: f64 = rng.random();
        let a = if u < params.epsilon {
            crate::agents::uniform_index(pick, na)
        } else {
            greedy
        };
        let was_greedy = row[a] == row[greedy];
        let max_here = row[greedy];
        let (r, next) = sample_branch(model, s, a, rng);
        let max_next = q[next * na..(next + 1) * na]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let idx = s * na + a;
        q[idx] += params.alpha * (r - avg + max_next - q[idx]);
        if was_greedy {
            avg += params.avg_alpha * (r - avg + max_next - max_here);
        }
        s = next;
    }
    RLearningResult {
        avg_reward: avg,
        q,
        num_actions: na,
    }
}
