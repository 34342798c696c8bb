use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::mlp::{ForwardCache, Mlp};

/// Two streams sharing no parameters: a value head V(s) with one output and
/// an advantage head G(s, ·) with one output per action. Action values are
/// R(s, a) = V(s) + G(s, a) - mean_a' G(s, a').
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingNet {
    pub value: Mlp,
    pub advantage: Mlp,
}

#[derive(Debug, Clone)]
pub struct DuelingCache {
    value: ForwardCache,
    advantage: ForwardCache,
}

/// Gradients for both streams.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingGrads {
    pub value: Mlp,
    pub advantage: Mlp,
}

/// Combines a `B × 1` value column with a `B × |A|` advantage block.
pub fn combine(value: &Array2<f64>, advantage: &Array2<f64>) -> Array2<f64> {
    let actions = advantage.ncols() as f64;
    let mean = advantage.sum_axis(Axis(1)) / actions;
    let mut out = advantage.clone();
    for ((mut row, v), m) in out
        .axis_iter_mut(Axis(0))
        .zip(value.column(0).iter())
        .zip(mean.iter())
    {
        row.mapv_inplace(|g| v + (g - m));
    }
    out
}

impl DuelingNet {
    /// `hidden` lists the hidden widths of each stream.
    pub fn he_init<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let value = Mlp::he_init(&sizes, rng)?;
        *sizes.last_mut().expect("non-empty") = actions;
        let advantage = Mlp::he_init(&sizes, rng)?;
        Self::new(value, advantage)
    }

    pub fn new(value: Mlp, advantage: Mlp) -> Result<Self> {
        if value.output_dim() != 1 {
            return Err(Error::Shape(format!(
                "value stream must have one output, has {}",
                value.output_dim()
            )));
        }
        if value.input_dim() != advantage.input_dim() {
            return Err(Error::Shape(format!(
                "stream inputs differ: {} vs {}",
                value.input_dim(),
                advantage.input_dim()
            )));
        }
        Ok(Self { value, advantage })
    }

    pub fn actions(&self) -> usize {
        self.advantage.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.value.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.value.param_count() + self.advantage.param_count()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.advantage.is_finite()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, DuelingCache)> {
        let (v, value) = self.value.forward(x)?;
        let (g, advantage) = self.advantage.forward(x)?;
        Ok((combine(&v, &g), DuelingCache { value, advantage }))
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let v = self.value.predict_batch(x)?;
        let g = self.advantage.predict_batch(x)?;
        Ok(combine(&v, &g))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.predict_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Backpropagates `grad_output` (∂L/∂R, `B × |A|`) into both streams.
    ///
    /// ∂L/∂V = Σ_a ∂L/∂R_a and ∂L/∂G_a = ∂L/∂R_a - mean_a' ∂L/∂R_a'.
    pub fn backward(&self, cache: &DuelingCache, grad_output: ArrayView2<f64>) -> Result<DuelingGrads> {
        let actions = self.actions();
        if grad_output.ncols() != actions {
            return Err(Error::Shape(format!(
                "output gradient has {} columns, expected {actions}",
                grad_output.ncols()
            )));
        }
        let row_sum = grad_output.sum_axis(Axis(1));
        let grad_v = row_sum.clone().insert_axis(Axis(1));
        let row_mean = row_sum / actions as f64;
        let grad_g = &grad_output - &row_mean.insert_axis(Axis(1));
        Ok(DuelingGrads {
            value: self.value.backward(&cache.value, grad_v.view())?,
            advantage: self.advantage.backward(&cache.advantage, grad_g.view())?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use ndarray::array;

    #[test]
    fn combine_identity() {
        let v = array![[2.0], [-1.0]];
        let g = array![[1.0, 2.0, 3.0], [0.0, 0.0, 6.0]];
        let r = combine(&v, &g);
        assert_eq!(r, array![[1.0, 2.0, 3.0], [-3.0, -3.0, 3.0]]);
        for (row, vv) in r.axis_iter(Axis(0)).zip(v.column(0)) {
            assert!((row.mean().unwrap() - vv).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_mean_equals_value() {
        let mut rng = stream(5, Purpose::Init, 0);
        let net = DuelingNet::he_init(6, &[16, 8], 7, &mut rng).unwrap();
        let x = Array2::from_shape_fn((5, 6), |(i, j)| ((i * 6 + j) as f64).sin());
        let r = net.predict_batch(x.view()).unwrap();
        let v = net.value.predict_batch(x.view()).unwrap();
        for i in 0..5 {
            assert!((r.row(i).mean().unwrap() - v[[i, 0]]).abs() < 1e-12);
        }
        let (cached, _) = net.forward(x.view()).unwrap();
        assert_eq!(cached, r);
        assert_eq!(net.predict(x.row(2).as_slice().unwrap()).unwrap(), r.row(2).to_vec());
    }

    #[test]
    fn rejects_mismatched_streams() {
        let mut rng = stream(6, Purpose::Init, 0);
        let v = Mlp::he_init(&[4, 2], &mut rng).unwrap();
        let g = Mlp::he_init(&[4, 3], &mut rng).unwrap();
        assert!(DuelingNet::new(v, g.clone()).is_err());
        let v = Mlp::he_init(&[5, 1], &mut rng).unwrap();
        assert!(DuelingNet::new(v, g).is_err());
    }
}
