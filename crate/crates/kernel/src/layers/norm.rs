use crate::error::Result;
use crate::param::{BufferId, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

use super::{BnUpdate, ForwardCtx};

/// Batch normalization over `B` and `T` of `[B, C, T]` with running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
    pub channels: usize,
}

impl BatchNorm1d {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::full(&[channels], 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running_mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[channels])),
            running_var: store.add_buffer(format!("{name}.running_var"), Tensor::full(&[channels], 1.0)),
            channels,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &mut ForwardCtx<'_>, x: Var) -> Result<Var> {
        let gamma = tape.param(store, self.gamma);
        let beta = tape.param(store, self.beta);
        if ctx.is_train() {
            let (y, cache) = tape.batchnorm1d_train(x, gamma, beta)?;
            ctx.bn_updates.push(BnUpdate {
                mean: self.running_mean,
                var: self.running_var,
                batch_mean: cache.batch_mean,
                batch_var: cache.batch_var_unbiased,
            });
            Ok(y)
        } else {
            let mean = store.buffer(self.running_mean).data();
            let var = store.buffer(self.running_var).data();
            tape.batchnorm1d_eval(x, gamma, beta, mean, var)
        }
    }

    pub fn num_params(&self) -> usize {
        2 * self.channels
    }
}
