//! Eager forward and backward kernels.
//!
//! These are plain functions over [`Tensor`]s. The [`Tape`](crate::Tape)
//! records which of them ran and calls the matching backward kernel.

use crate::error::{KernelError, Result};
use crate::tensor::Tensor;

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;
/// Added under the square root of the RMSE loss so its gradient stays bounded at zero error.
pub const RMSE_EPS: f64 = 1e-12;

/// `c (+)= op(a) * op(b)` where `a` is `m x k` and `b` is `k x n` after optional transposition.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    // a stored row-major as [m,k] or, when transposed, as [k,m].
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are checked above against the strides used.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.expect_rank("matmul", 2)?;
    b.expect_rank("matmul", 2)?;
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(KernelError::dim("matmul", format!("inner dim {k}"), k2));
    }
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, a.data(), false, b.data(), false, &mut out, false);
    Tensor::new(&[m, n], out)
}

/// Returns `(grad_a, grad_b)` for `c = a b`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut ga = vec![0.0; m * k];
    gemm(m, n, k, grad.data(), false, b.data(), true, &mut ga, false);
    let mut gb = vec![0.0; k * n];
    gemm(k, m, n, a.data(), true, grad.data(), false, &mut gb, false);
    (
        Tensor::new(a.shape(), ga).expect("shape"),
        Tensor::new(b.shape(), gb).expect("shape"),
    )
}

/// Affine map `x W + b` for `x: [B, D]`, `W: [D, O]`, `b: [O]`.
pub fn linear_forward(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let mut y = matmul(x, weight)?;
    add_bias_inplace(&mut y, bias, "linear")?;
    Ok(y)
}

pub(crate) fn add_bias_inplace(y: &mut Tensor, bias: &Tensor, op: &'static str) -> Result<()> {
    bias.expect_rank(op, 1)?;
    let n = *y.shape().last().unwrap();
    if bias.len() != n {
        return Err(KernelError::dim(op, format!("bias length {n}"), bias.len()));
    }
    for row in y.data_mut().chunks_mut(n) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(())
}

pub(crate) fn bias_grad(grad: &Tensor) -> Tensor {
    let n = *grad.shape().last().unwrap();
    let mut gb = vec![0.0; n];
    for row in grad.data().chunks(n) {
        for (g, v) in gb.iter_mut().zip(row) {
            *g += v;
        }
    }
    Tensor::new(&[n], gb).expect("shape")
}

fn conv_check(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize, usize)> {
    x.expect_rank("conv1d", 3)?;
    weight.expect_rank("conv1d", 3)?;
    bias.expect_rank("conv1d", 1)?;
    let (b, c_in, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, wc_in, k) = (weight.shape()[0], weight.shape()[1], weight.shape()[2]);
    if k != 3 {
        return Err(KernelError::dim("conv1d", "kernel width 3", k));
    }
    if wc_in != c_in {
        return Err(KernelError::dim("conv1d", format!("{wc_in} input channels"), c_in));
    }
    if bias.len() != c_out {
        return Err(KernelError::dim("conv1d", format!("bias length {c_out}"), bias.len()));
    }
    Ok((b, c_in, t, c_out))
}

/// Unfold `[B, C, T]` into columns `[C*3, B*T]` with one zero of padding per side.
pub(crate) fn conv_columns(x: &Tensor) -> Vec<f64> {
    let (b, c_in, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let bt = b * t;
    let mut cols = vec![0.0; c_in * 3 * bt];
    let xd = x.data();
    for c in 0..c_in {
        for k in 0..3 {
            let row = &mut cols[(c * 3 + k) * bt..(c * 3 + k + 1) * bt];
            for bi in 0..b {
                let src = &xd[(bi * c_in + c) * t..(bi * c_in + c + 1) * t];
                for ti in 0..t {
                    // input position ti + k - 1
                    let pos = ti + k;
                    if pos >= 1 && pos <= t {
                        row[bi * t + ti] = src[pos - 1];
                    }
                }
            }
        }
    }
    cols
}

/// 1-D convolution, kernel width 3, stride 1, zero padding 1: `[B, C_in, T] -> [B, C_out, T]`.
pub fn conv1d_forward(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let cols = conv_columns(x);
    conv1d_from_columns(x, weight, bias, &cols)
}

pub(crate) fn conv1d_from_columns(x: &Tensor, weight: &Tensor, bias: &Tensor, cols: &[f64]) -> Result<Tensor> {
    let (b, c_in, t, c_out) = conv_check(x, weight, bias)?;
    let bt = b * t;
    let mut yt = vec![0.0; c_out * bt];
    gemm(c_out, c_in * 3, bt, weight.data(), false, cols, false, &mut yt, false);
    let mut y = vec![0.0; b * c_out * t];
    for o in 0..c_out {
        let bo = bias.data()[o];
        for bi in 0..b {
            let dst = &mut y[(bi * c_out + o) * t..(bi * c_out + o + 1) * t];
            let src = &yt[o * bt + bi * t..o * bt + (bi + 1) * t];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s + bo;
            }
        }
    }
    Tensor::new(&[b, c_out, t], y)
}

/// Returns `(grad_x, grad_weight, grad_bias)`.
pub fn conv1d_backward(x: &Tensor, weight: &Tensor, cols: &[f64], grad: &Tensor, need_x: bool) -> (Option<Tensor>, Tensor, Tensor) {
    let (b, c_in, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let c_out = weight.shape()[0];
    let bt = b * t;
    // grad as [C_out, B*T]
    let mut gt = vec![0.0; c_out * bt];
    let mut gbias = vec![0.0; c_out];
    let gd = grad.data();
    for o in 0..c_out {
        for bi in 0..b {
            let src = &gd[(bi * c_out + o) * t..(bi * c_out + o + 1) * t];
            gt[o * bt + bi * t..o * bt + (bi + 1) * t].copy_from_slice(src);
            gbias[o] += src.iter().sum::<f64>();
        }
    }
    let mut gw = vec![0.0; c_out * c_in * 3];
    gemm(c_out, bt, c_in * 3, &gt, false, cols, true, &mut gw, false);
    let gx = need_x.then(|| {
        let mut gcols = vec![0.0; c_in * 3 * bt];
        gemm(c_in * 3, c_out, bt, weight.data(), true, &gt, false, &mut gcols, false);
        let mut gx = vec![0.0; b * c_in * t];
        for c in 0..c_in {
            for k in 0..3 {
                let row = &gcols[(c * 3 + k) * bt..(c * 3 + k + 1) * bt];
                for bi in 0..b {
                    let dst = &mut gx[(bi * c_in + c) * t..(bi * c_in + c + 1) * t];
                    for ti in 0..t {
                        let pos = ti + k;
                        if pos >= 1 && pos <= t {
                            dst[pos - 1] += row[bi * t + ti];
                        }
                    }
                }
            }
        }
        Tensor::new(x.shape(), gx).expect("shape")
    });
    (
        gx,
        Tensor::new(weight.shape(), gw).expect("shape"),
        Tensor::new(&[c_out], gbias).expect("shape"),
    )
}

/// Normalization state cached by the train-mode batch norm forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    /// Unbiased batch variance, used for the running estimate.
    pub batch_var_unbiased: Vec<f64>,
}

fn bn_check(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(usize, usize, usize)> {
    x.expect_rank("batchnorm1d", 3)?;
    let (b, c, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if gamma.len() != c || beta.len() != c {
        return Err(KernelError::dim("batchnorm1d", format!("{c} channels"), gamma.len()));
    }
    Ok((b, c, t))
}

/// Batch normalization over the `B` and `T` axes of `[B, C, T]` using batch statistics.
pub fn batchnorm1d_train(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(Tensor, BatchNormCache)> {
    let (b, c, t) = bn_check(x, gamma, beta)?;
    let n = b * t;
    if n < 2 {
        return Err(KernelError::DegenerateBatch {
            op: "batchnorm1d",
            size: n,
        });
    }
    let xd = x.data();
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for bi in 0..b {
            s += xd[(bi * c + ch) * t..(bi * c + ch + 1) * t].iter().sum::<f64>();
        }
        mean[ch] = s / n as f64;
        let mut ss = 0.0;
        for bi in 0..b {
            ss += xd[(bi * c + ch) * t..(bi * c + ch + 1) * t]
                .iter()
                .map(|v| (v - mean[ch]).powi(2))
                .sum::<f64>();
        }
        var[ch] = ss / n as f64;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BATCHNORM_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; xd.len()];
    let mut y = vec![0.0; xd.len()];
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * t;
            for ti in 0..t {
                let h = (xd[base + ti] - mean[ch]) * inv_std[ch];
                xhat[base + ti] = h;
                y[base + ti] = gamma.data()[ch] * h + beta.data()[ch];
            }
        }
    }
    let unbiased = var.iter().map(|v| v * n as f64 / (n - 1) as f64).collect();
    Ok((
        Tensor::new(x.shape(), y)?,
        BatchNormCache {
            xhat,
            inv_std,
            batch_mean: mean,
            batch_var_unbiased: unbiased,
        },
    ))
}

/// Batch normalization with fixed statistics; returns the output and per-channel `1/sqrt(var+eps)`.
pub fn batchnorm1d_eval(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &[f64],
    running_var: &[f64],
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let (b, c, t) = bn_check(x, gamma, beta)?;
    let inv_std: Vec<f64> = running_var.iter().map(|v| 1.0 / (v + BATCHNORM_EPS).sqrt()).collect();
    let xd = x.data();
    let mut xhat = vec![0.0; xd.len()];
    let mut y = vec![0.0; xd.len()];
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * t;
            for ti in 0..t {
                let h = (xd[base + ti] - running_mean[ch]) * inv_std[ch];
                xhat[base + ti] = h;
                y[base + ti] = gamma.data()[ch] * h + beta.data()[ch];
            }
        }
    }
    Ok((Tensor::new(x.shape(), y)?, xhat, inv_std))
}

/// Returns `(grad_x, grad_gamma, grad_beta)`. `train` selects batch-statistics backward.
pub fn batchnorm1d_backward(
    shape: &[usize],
    gamma: &Tensor,
    xhat: &[f64],
    inv_std: &[f64],
    grad: &Tensor,
    train: bool,
) -> (Tensor, Tensor, Tensor) {
    let (b, c, t) = (shape[0], shape[1], shape[2]);
    let n = (b * t) as f64;
    let gd = grad.data();
    let mut ggamma = vec![0.0; c];
    let mut gbeta = vec![0.0; c];
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * t;
            for ti in 0..t {
                ggamma[ch] += gd[base + ti] * xhat[base + ti];
                gbeta[ch] += gd[base + ti];
            }
        }
    }
    let mut gx = vec![0.0; gd.len()];
    for bi in 0..b {
        for ch in 0..c {
            let g = gamma.data()[ch];
            let base = (bi * c + ch) * t;
            for ti in 0..t {
                let i = base + ti;
                gx[i] = if train {
                    // sum(dxhat) = g * gbeta, sum(dxhat * xhat) = g * ggamma
                    g * inv_std[ch] / n * (n * gd[i] - gbeta[ch] - xhat[i] * ggamma[ch])
                } else {
                    g * inv_std[ch] * gd[i]
                };
            }
        }
    }
    (
        Tensor::new(shape, gx).expect("shape"),
        Tensor::new(&[c], ggamma).expect("shape"),
        Tensor::new(&[c], gbeta).expect("shape"),
    )
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Inverted-dropout keep mask: zeros with probability `p`, survivors `1/(1-p)`.
pub fn dropout_mask(len: usize, p: f64, rng: &mut crate::Rng) -> Result<Vec<f64>> {
    check_dropout_rate(p)?;
    let keep = 1.0 / (1.0 - p);
    Ok((0..len).map(|_| if rng.bernoulli(p) { 0.0 } else { keep }).collect())
}

pub(crate) fn check_dropout_rate(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(KernelError::InvalidParameter(format!("dropout rate {p} outside [0, 1)")));
    }
    Ok(())
}

/// `sqrt(mean((pred - target)^2) + RMSE_EPS)`.
pub fn rmse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    pred.expect_same_shape("rmse_loss", target)?;
    let n = pred.len() as f64;
    let mse = pred.data().iter().zip(target.data()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    Ok((mse + RMSE_EPS).sqrt())
}

pub fn rmse_backward(pred: &Tensor, target: &Tensor, loss: f64, grad: f64) -> Tensor {
    let n = pred.len() as f64;
    let scale = grad / (n * loss);
    let data = pred.data().iter().zip(target.data()).map(|(p, t)| (p - t) * scale).collect();
    Tensor::new(pred.shape(), data).expect("shape")
}

/// Mean cross-entropy of `logits: [B, K]` against integer labels. Returns the loss and the softmax.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    logits.expect_rank("softmax_cross_entropy", 2)?;
    let (b, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != b {
        return Err(KernelError::dim("softmax_cross_entropy", format!("{b} labels"), labels.len()));
    }
    let mut probs = vec![0.0; b * k];
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(KernelError::Label { label, classes: k });
        }
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        for j in 0..k {
            probs[i * k + j] = ((row[j] - max) - log_sum).exp();
        }
        loss -= row[label] - max - log_sum;
    }
    Ok((loss / b as f64, probs))
}

pub fn softmax_cross_entropy_backward(probs: &[f64], labels: &[usize], k: usize, grad: f64) -> Tensor {
    let b = labels.len();
    let mut g = probs.to_vec();
    for (i, &label) in labels.iter().enumerate() {
        g[i * k + label] -= 1.0;
    }
    let scale = grad / b as f64;
    g.iter_mut().for_each(|v| *v *= scale);
    Tensor::new(&[b, k], g).expect("shape")
}
