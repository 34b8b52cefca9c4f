use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tape::{Tape, Var};

use super::uniform_init;

/// `y = x W + b` with `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_features: usize, out_features: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), uniform_init(&[in_features, out_features], bound, rng));
        let bias = store.add(format!("{name}.bias"), uniform_init(&[out_features], bound, rng));
        Self {
            weight,
            bias,
            in_features,
            out_features,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        tape.linear(x, w, b)
    }

    pub fn num_params(&self) -> usize {
        self.in_features * self.out_features + self.out_features
    }
}
