//! Parameterized layers built on the [`Tape`](crate::Tape).
//!
//! Layers only hold [`ParamId`](crate::ParamId)s; values live in a
//! [`ParamStore`](crate::ParamStore) owned by the enclosing model.

mod conv;
mod linear;
mod norm;
mod recurrent;

pub use conv::Conv1d;
pub use linear::Linear;
pub use norm::BatchNorm1d;
pub use recurrent::{BiLstm, Gru, Lstm, LstmOutput};

use serde::{Deserialize, Serialize};

use crate::ops::BATCHNORM_MOMENTUM;
use crate::param::{BufferId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
struct BnUpdate {
    mean: BufferId,
    var: BufferId,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

/// Per-forward-pass state: mode, dropout randomness and pending running-stat updates.
pub struct ForwardCtx<'r> {
    mode: Mode,
    rng: Option<&'r mut Rng>,
    bn_updates: Vec<BnUpdate>,
}

impl<'r> ForwardCtx<'r> {
    pub fn train(rng: &'r mut Rng) -> Self {
        Self {
            mode: Mode::Train,
            rng: Some(rng),
            bn_updates: Vec::new(),
        }
    }

    pub fn eval() -> ForwardCtx<'static> {
        ForwardCtx {
            mode: Mode::Eval,
            rng: None,
            bn_updates: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_train(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn rng(&mut self) -> Option<&mut Rng> {
        self.rng.as_deref_mut()
    }

    /// Apply pending batch-norm running statistic updates (momentum 0.1).
    pub fn commit(self, store: &mut ParamStore) {
        for u in self.bn_updates {
            blend(store.buffer_mut(u.mean), &u.batch_mean);
            blend(store.buffer_mut(u.var), &u.batch_var);
        }
    }
}

fn blend(running: &mut Tensor, batch: &[f64]) {
    for (r, b) in running.data_mut().iter_mut().zip(batch) {
        *r = (1.0 - BATCHNORM_MOMENTUM) * *r + BATCHNORM_MOMENTUM * b;
    }
}

/// Uniform initialization in `[-bound, bound]`.
pub fn uniform_init(shape: &[usize], bound: f64, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_range(-bound, bound)).collect();
    Tensor::new(shape, data).expect("shape")
}
