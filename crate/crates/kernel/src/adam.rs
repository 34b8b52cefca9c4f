use serde::{Deserialize, Serialize};

use crate::error::{KernelError, Result};
use crate::param::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 penalty: `weight_decay * w` is added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// First and second moments for every parameter of one store.
///
/// `AdamState::default()` is uninitialized; stepping it is an error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.params().iter().map(|p| p.value.zeros_like()).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &Tensor {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &Tensor {
        &self.v[index]
    }

    /// One bias-corrected Adam update of every trainable parameter.
    pub fn step(&mut self, store: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
        if self.m.is_empty() && !store.is_empty() {
            return Err(KernelError::State("Adam state is not initialized".into()));
        }
        if self.m.len() != store.len() {
            return Err(KernelError::State(format!(
                "Adam state tracks {} parameters, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        for (p, m) in store.params().iter().zip(&self.m) {
            if p.value.shape() != m.shape() {
                return Err(KernelError::State(format!("moment shape mismatch for {}", p.name)));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for ((p, m), v) in store.params_mut().iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.trainable {
                continue;
            }
            let w = p.value.data_mut();
            let g = p.grad.data();
            for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
                let g = g + cfg.weight_decay * *w;
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_store(w0: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::from_vec(vec![w0]));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = quadratic_store(1.5);
        let mut st = AdamState::new(&s);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..10 {
            st.step(&mut s, &cfg).unwrap();
        }
        assert_eq!(s.params()[0].value.data(), &[1.5]);
        assert_eq!(st.step_count(), 10);
    }

    #[test]
    fn single_step_on_square() {
        // f(w) = w^2 at w = 1: g = 2, m_hat = 2, v_hat = 4
        let mut s = quadratic_store(1.0);
        s.params_mut()[0].grad = Tensor::from_vec(vec![2.0]);
        let mut st = AdamState::new(&s);
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        st.step(&mut s, &cfg).unwrap();
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((s.params()[0].value.item() - expected).abs() < 1e-15);
        assert!((s.params()[0].value.item() - 0.9).abs() < 1e-8);
    }

    #[test]
    fn converges_on_shifted_square() {
        let mut s = quadratic_store(0.0);
        let mut st = AdamState::new(&s);
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..500 {
            let w = s.params()[0].value.item();
            s.params_mut()[0].grad = Tensor::from_vec(vec![2.0 * (w - 3.0)]);
            st.step(&mut s, &cfg).unwrap();
        }
        assert!((s.params()[0].value.item() - 3.0).abs() < 1e-2);
    }

    #[test]
    fn uninitialized_state_errors() {
        let mut s = quadratic_store(1.0);
        let mut st = AdamState::default();
        assert!(matches!(st.step(&mut s, &AdamConfig::default()), Err(KernelError::State(_))));
    }

    #[test]
    fn frozen_params_are_skipped() {
        let mut s = quadratic_store(1.0);
        s.params_mut()[0].grad = Tensor::from_vec(vec![1.0]);
        s.params_mut()[0].trainable = false;
        let mut st = AdamState::new(&s);
        st.step(&mut s, &AdamConfig::default()).unwrap();
        assert_eq!(s.params()[0].value.item(), 1.0);
    }

    #[test]
    fn weight_decay_is_coupled() {
        // zero loss gradient, decay only: g = wd * w
        let mut s = quadratic_store(2.0);
        let mut st = AdamState::new(&s);
        let cfg = AdamConfig {
            lr: 0.01,
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        st.step(&mut s, &cfg).unwrap();
        let g: f64 = 1.0;
        let expected = 2.0 - 0.01 * g / (g.abs() + 1e-8);
        assert!((s.params()[0].value.item() - expected).abs() < 1e-12);
        assert!((st.first_moment(0).item() - 0.1).abs() < 1e-15);
    }
}
