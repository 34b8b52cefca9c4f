use serde::{Deserialize, Serialize};

use crate::error::{KernelError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BufferId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

/// Non-trainable state such as batch norm running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Buffer {
    pub name: String,
    pub value: Tensor,
}

/// Owns every parameter and buffer of one model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    buffers: Vec<Buffer>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = value.zeros_like();
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
            trainable: true,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: Tensor) -> BufferId {
        self.buffers.push(Buffer { name: name.into(), value });
        BufferId(self.buffers.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn buffer(&self, id: BufferId) -> &Tensor {
        &self.buffers[id.0].value
    }

    pub fn buffer_mut(&mut self, id: BufferId) -> &mut Tensor {
        &mut self.buffers[id.0].value
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn buffers(&self) -> &[Buffer] {
        &self.buffers
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Mark every parameter whose name starts with `prefix`; returns how many matched.
    pub fn set_trainable(&mut self, prefix: &str, trainable: bool) -> usize {
        let mut n = 0;
        for p in self.params.iter_mut().filter(|p| p.name.starts_with(prefix)) {
            p.trainable = trainable;
            n += 1;
        }
        n
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Copy values (not gradients) from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        self.check_layout(other)?;
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            dst.value = src.value.clone();
        }
        for (dst, src) in self.buffers.iter_mut().zip(&other.buffers) {
            dst.value = src.value.clone();
        }
        Ok(())
    }

    pub fn check_layout(&self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() || self.buffers.len() != other.buffers.len() {
            return Err(KernelError::State(format!(
                "layout mismatch: {} params/{} buffers vs {}/{}",
                self.params.len(),
                self.buffers.len(),
                other.params.len(),
                other.buffers.len()
            )));
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(KernelError::State(format!("parameter {} does not match {}", a.name, b.name)));
            }
        }
        Ok(())
    }

    /// Replace a parameter value; the shape must be unchanged.
    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .find(name)
            .ok_or_else(|| KernelError::State(format!("no parameter named {name}")))?;
        let p = &mut self.params[id.0];
        p.value.expect_same_shape("set_value", &value)?;
        p.value = value;
        Ok(())
    }

    pub fn set_buffer(&mut self, name: &str, value: Tensor) -> Result<()> {
        let b = self
            .buffers
            .iter_mut()
            .find(|b| b.name == name)
            .ok_or_else(|| KernelError::State(format!("no buffer named {name}")))?;
        b.value.expect_same_shape("set_buffer", &value)?;
        b.value = value;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_clears() {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::full(&[2, 2], 1.0));
        s.get_mut(id).grad.fill(3.0);
        s.zero_grad();
        assert!(s.get(id).grad.data().iter().all(|&g| g == 0.0));
        assert_eq!(s.get(id).grad.shape(), s.get(id).value.shape());
    }

    #[test]
    fn trainable_prefix() {
        let mut s = ParamStore::new();
        s.add("head.w", Tensor::zeros(&[1]));
        s.add("head.b", Tensor::zeros(&[1]));
        s.add("body.w", Tensor::zeros(&[1]));
        assert_eq!(s.set_trainable("head.", false), 2);
        assert!(s.params()[2].trainable);
    }
}
