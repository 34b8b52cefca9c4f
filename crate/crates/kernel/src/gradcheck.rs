//! Central finite-difference gradient verification.
//!
//! Relative error per coordinate is `|a - n| / max(1e-8, |a| + |n|)` for an
//! analytic value `a` and a numeric value `n`.

use crate::error::{KernelError, Result};
use crate::param::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_FD_EPS: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input or parameter index, coordinate)` of the worst coordinate.
    pub worst: (usize, usize),
    pub coordinates: usize,
    /// Worst relative error per input or parameter.
    pub per_input: Vec<f64>,
}

impl GradCheckReport {
    fn new(n: usize) -> Self {
        Self {
            max_rel_error: 0.0,
            worst: (0, 0),
            coordinates: 0,
            per_input: vec![0.0; n],
        }
    }

    fn record(&mut self, input: usize, coord: usize, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.coordinates += 1;
        self.per_input[input] = self.per_input[input].max(e);
        if e > self.max_rel_error {
            self.max_rel_error = e;
            self.worst = (input, coord);
        }
    }
}

fn finite(v: f64, what: impl Fn() -> String, index: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(KernelError::NonFinite { what: what(), index })
    }
}

/// Reduce a non-scalar output to a scalar with a fixed random projection.
fn scalarize(tape: &mut Tape, out: Var, projection: &mut Option<Vec<f64>>, seed: u64) -> Result<Var> {
    let n = tape.value(out).len();
    if n == 1 && projection.is_none() {
        return Ok(out);
    }
    let w = projection.get_or_insert_with(|| {
        let mut rng = Rng::new(seed);
        (0..n).map(|_| rng.normal()).collect()
    });
    tape.weighted_sum(out, w.clone())
}

/// Check the gradient of `f` with respect to each of `inputs`.
///
/// `f` may return a tensor of any shape; non-scalar outputs are contracted
/// with a seeded random weight vector before differentiation.
pub fn grad_check<F>(inputs: &[Tensor], f: F, fd_eps: f64, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut projection = None;
    let eval = |values: &[Tensor], projection: &mut Option<Vec<f64>>| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.input(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let loss = scalarize(&mut tape, out, projection, seed)?;
        Ok((tape, vars, loss))
    };

    let (tape, vars, loss) = eval(inputs, &mut projection)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| grads.get(*v).cloned().unwrap_or_else(|| t.zeros_like()))
        .collect();

    let mut report = GradCheckReport::new(inputs.len());
    let mut work = inputs.to_vec();
    for i in 0..inputs.len() {
        for j in 0..inputs[i].len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + fd_eps;
            let (t, _, l) = eval(&work, &mut projection)?;
            let fp = finite(t.value(l).item(), || format!("input {i} (+eps)"), j)?;
            work[i].data_mut()[j] = orig - fd_eps;
            let (t, _, l) = eval(&work, &mut projection)?;
            let fm = finite(t.value(l).item(), || format!("input {i} (-eps)"), j)?;
            work[i].data_mut()[j] = orig;
            let a = finite(analytic[i].data()[j], || format!("analytic gradient of input {i}"), j)?;
            report.record(i, j, a, (fp - fm) / (2.0 * fd_eps));
        }
    }
    Ok(report)
}

/// Anything that owns a [`ParamStore`].
pub trait HasParams {
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
}

impl HasParams for ParamStore {
    fn store(&self) -> &ParamStore {
        self
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        self
    }
}

/// Check the gradient of a scalar `loss` with respect to every parameter coordinate of `model`.
///
/// `loss` must bind parameters through [`Tape::param`] so gradients land in the store.
pub fn grad_check_params<M, F>(model: &mut M, loss: F, fd_eps: f64) -> Result<GradCheckReport>
where
    M: HasParams,
    F: Fn(&M, &mut Tape) -> Result<Var>,
{
    model.store_mut().zero_grad();
    let mut tape = Tape::new();
    let l = loss(model, &mut tape)?;
    tape.backward_into(l, model.store_mut())?;
    let analytic: Vec<Tensor> = model.store().params().iter().map(|p| p.grad.clone()).collect();
    model.store_mut().zero_grad();

    let scalar = |m: &M| -> Result<f64> {
        let mut tape = Tape::new();
        let l = loss(m, &mut tape)?;
        Ok(tape.value(l).item())
    };

    let mut report = GradCheckReport::new(analytic.len());
    for (p, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = model.store().params()[p].value.data()[j];
            model.store_mut().params_mut()[p].value.data_mut()[j] = orig + fd_eps;
            let fp = scalar(model);
            model.store_mut().params_mut()[p].value.data_mut()[j] = orig - fd_eps;
            let fm = scalar(model);
            model.store_mut().params_mut()[p].value.data_mut()[j] = orig;
            let name = || model.store().params()[p].name.clone();
            let fp = finite(fp?, name, j)?;
            let fm = finite(fm?, name, j)?;
            let a = finite(grad.data()[j], name, j)?;
            report.record(p, j, a, (fp - fm) / (2.0 * fd_eps));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 2.1).abs() < 1e-15);
    }

    #[test]
    fn detects_wrong_gradient() {
        // scale by 2 but claim via an identity: compare tanh against itself is fine,
        // a mismatched analytic path must be caught.
        let x = Tensor::from_vec(vec![0.3, -0.7]);
        let ok = grad_check(std::slice::from_ref(&x), |t, v| Ok(t.tanh(v[0])), DEFAULT_FD_EPS, 1).unwrap();
        assert!(ok.max_rel_error < 1e-8);
        let bad = grad_check(
            &[x],
            |t, v| {
                let y = t.grad_reverse(v[0], 1.0);
                Ok(t.tanh(y))
            },
            DEFAULT_FD_EPS,
            1,
        )
        .unwrap();
        assert!(bad.max_rel_error > 0.9);
    }

    #[test]
    fn non_finite_reports_coordinate() {
        // the output overflows, so the first perturbed coordinate fails
        let x = Tensor::from_vec(vec![1.0, 1e308]);
        let err = grad_check(&[x], |t, v| Ok(t.scale(v[0], 10.0)), DEFAULT_FD_EPS, 1).unwrap_err();
        assert!(matches!(err, KernelError::NonFinite { index: 0, .. }), "{err:?}");
    }
}
