use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    clip_global_norm, read_mlp, write_mlp, AdamState, DuelingCache, DuelingNet, ForwardCache, Mlp,
    Tokens,
};

/// Action-value approximator: either the two-stream dueling form or a single
/// network emitting one value per action.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Dueling(DuelingNet),
    Single(Mlp),
}

#[derive(Debug, Clone)]
pub enum NetCache {
    Dueling(DuelingCache),
    Single(ForwardCache),
}

impl Network {
    pub fn he_init<R: Rng + ?Sized>(
        dueling: bool,
        input: usize,
        hidden: &[usize],
        actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if dueling {
            Ok(Network::Dueling(DuelingNet::he_init(input, hidden, actions, rng)?))
        } else {
            let mut sizes = vec![input];
            sizes.extend_from_slice(hidden);
            sizes.push(actions);
            Ok(Network::Single(Mlp::he_init(&sizes, rng)?))
        }
    }

    pub fn is_dueling(&self) -> bool {
        matches!(self, Network::Dueling(_))
    }

    /// The component networks, value stream first for the dueling form.
    pub fn parts(&self) -> Vec<&Mlp> {
        match self {
            Network::Dueling(d) => vec![&d.value, &d.advantage],
            Network::Single(m) => vec![m],
        }
    }

    fn parts_mut(&mut self) -> Vec<&mut Mlp> {
        match self {
            Network::Dueling(d) => vec![&mut d.value, &mut d.advantage],
            Network::Single(m) => vec![m],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.parts()[0].input_dim()
    }

    pub fn actions(&self) -> usize {
        match self {
            Network::Dueling(d) => d.actions(),
            Network::Single(m) => m.output_dim(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.parts().iter().map(|m| m.param_count()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|m| m.is_finite())
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            Network::Dueling(d) => d.predict_batch(x),
            Network::Single(m) => m.predict_batch(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Network::Dueling(d) => d.predict(x),
            Network::Single(m) => m.predict(x),
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, NetCache)> {
        match self {
            Network::Dueling(d) => {
                let (out, cache) = d.forward(x)?;
                Ok((out, NetCache::Dueling(cache)))
            }
            Network::Single(m) => {
                let (out, cache) = m.forward(x)?;
                Ok((out, NetCache::Single(cache)))
            }
        }
    }

    /// Gradients of each part, in [`Network::parts`] order.
    pub fn backward(&self, cache: &NetCache, grad_output: ArrayView2<f64>) -> Result<Vec<Mlp>> {
        match (self, cache) {
            (Network::Dueling(d), NetCache::Dueling(c)) => {
                let g = d.backward(c, grad_output)?;
                Ok(vec![g.value, g.advantage])
            }
            (Network::Single(m), NetCache::Single(c)) => Ok(vec![m.backward(c, grad_output)?]),
            _ => Err(Error::Shape("cache from a different architecture".into())),
        }
    }

    /// Clips each part's gradient to `clip_norm` and takes one Adam step per
    /// part.
    pub fn apply_gradients(
        &mut self,
        mut grads: Vec<Mlp>,
        optimizer: &mut [AdamState],
        lr: f64,
        clip_norm: f64,
    ) -> Result<()> {
        let mut parts = self.parts_mut();
        if grads.len() != parts.len() || optimizer.len() != parts.len() {
            return Err(Error::Shape(
                "gradient or optimizer count does not match the network".into(),
            ));
        }
        for ((p, g), opt) in parts.iter_mut().zip(grads.iter_mut()).zip(optimizer) {
            clip_global_norm(g, clip_norm);
            opt.step(p, g, lr)?;
        }
        Ok(())
    }

    pub fn new_optimizer(&self) -> Vec<AdamState> {
        self.parts().into_iter().map(AdamState::new).collect()
    }

    pub(crate) fn write(&self, out: &mut String) {
        out.push_str(if self.is_dueling() { "dueling\n" } else { "single\n" });
        for m in self.parts() {
            write_mlp(out, m);
        }
    }

    pub(crate) fn read(tokens: &mut Tokens) -> Result<Self> {
        match tokens.next_token()? {
            "dueling" => {
                let value = read_mlp(tokens)?;
                let advantage = read_mlp(tokens)?;
                Ok(Network::Dueling(DuelingNet::new(value, advantage)?))
            }
            "single" => Ok(Network::Single(read_mlp(tokens)?)),
            other => Err(Error::Format {
                what: "agent checkpoint",
                detail: format!("unknown network kind `{other}`"),
            }),
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
