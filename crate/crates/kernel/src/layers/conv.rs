use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tape::{Tape, Var};

use super::uniform_init;

/// Width-3, stride-1, padding-1 convolution over `[B, C, T]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Conv1d {
    pub fn new(store: &mut ParamStore, name: &str, in_channels: usize, out_channels: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / ((in_channels * 3) as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), uniform_init(&[out_channels, in_channels, 3], bound, rng));
        let bias = store.add(format!("{name}.bias"), uniform_init(&[out_channels], bound, rng));
        Self {
            weight,
            bias,
            in_channels,
            out_channels,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        tape.conv1d(x, w, b)
    }

    pub fn num_params(&self) -> usize {
        self.out_channels * self.in_channels * 3 + self.out_channels
    }
}
