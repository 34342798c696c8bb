use ndarray::Zip;

use crate::error::{Error, Result};
use crate::nn::mlp::Mlp;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Mlp,
    pub second: Mlp,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &Mlp) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp, lr: f64) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.first) {
            return Err(Error::Shape(
                "parameters, gradients and moments differ in shape".into(),
            ));
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        let layers = params
            .layers_mut()
            .iter_mut()
            .zip(self.first.layers_mut())
            .zip(self.second.layers_mut())
            .zip(grads.layers());
        for (((p, m), v), g) in layers {
            Zip::from(&mut p.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut p.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar(w: f64) -> Mlp {
        let mut m = Mlp::zeros(&[1, 1]).unwrap();
        m.layers_mut()[0].weights[[0, 0]] = w;
        m
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut p = scalar(1.5);
        let mut adam = AdamState::new(&p);
        adam.step(&mut p, &scalar(2.0), 0.1).unwrap();
        let after_one = p.clone();
        let m1 = adam.first.layers()[0].weights[[0, 0]];
        let v1 = adam.second.layers()[0].weights[[0, 0]];
        let mut q = scalar(0.7);
        let mut fresh = AdamState::new(&q);
        fresh.step(&mut q, &scalar(0.0), 0.1).unwrap();
        assert_eq!(q, scalar(0.7));
        assert_eq!(fresh.step, 1);

        adam.step(&mut p, &scalar(0.0), 0.0).unwrap();
        assert_eq!(p, after_one);
        assert_eq!(adam.first.layers()[0].weights[[0, 0]], 0.9 * m1);
        assert_eq!(adam.second.layers()[0].weights[[0, 0]], 0.999 * v1);
    }

    #[test]
    fn first_step_matches_hand_value() {
        // m = 0.1 g, v = 0.001 g², m̂ = g, v̂ = g², Δ = -lr g / (|g| + ε)
        let mut p = Mlp::zeros(&[2, 1]).unwrap();
        p.layers_mut()[0].weights = array![[0.25], [-1.0]];
        let mut g = Mlp::zeros(&[2, 1]).unwrap();
        g.layers_mut()[0].weights = array![[0.3], [-2.0]];
        g.layers_mut()[0].bias = array![1e-9];
        let mut adam = AdamState::new(&p);
        let lr = 5e-4;
        adam.step(&mut p, &g, lr).unwrap();
        let want0 = 0.25 - lr * 0.3 / (0.3 + 1e-8);
        let want1 = -1.0 - lr * -2.0 / (2.0 + 1e-8);
        let want_b = -lr * 1e-9 / (1e-9 + 1e-8);
        assert!((p.layers()[0].weights[[0, 0]] - want0).abs() < 1e-12);
        assert!((p.layers()[0].weights[[1, 0]] - want1).abs() < 1e-12);
        assert!((p.layers()[0].bias[0] - want_b).abs() < 1e-12);
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut p = scalar(0.3);
            let mut adam = AdamState::new(&p);
            for i in 0..50 {
                let g = scalar((i as f64 * 0.37).sin());
                adam.step(&mut p, &g, 1e-2).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Mlp::zeros(&[2, 1]).unwrap();
        let mut adam = AdamState::new(&p);
        assert!(adam.step(&mut p, &Mlp::zeros(&[3, 1]).unwrap(), 0.1).is_err());
    }
}
