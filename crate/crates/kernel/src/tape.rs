//! Reverse-mode differentiation over tensor operations.
//!
//! A [`Tape`] records every operation of one forward pass in execution order.
//! [`Tape::backward`] then walks the record in reverse, so a tape is built,
//! differentiated once and dropped.

use crate::error::{KernelError, Result};
use crate::ops::{self, BatchNormCache};
use crate::param::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Dropout(Var, Vec<f64>),
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        cols: Vec<f64>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        train: bool,
    },
    Permute021(Var),
    Reshape(Var),
    TimeStep(Var, usize),
    SliceCols(Var, usize),
    StackTime(Vec<Var>),
    ConcatCols(Vec<Var>),
    MeanTime(Var),
    WeightedSum(Var, Vec<f64>),
    GradReverse(Var, f64),
    Rmse {
        pred: Var,
        target: Tensor,
    },
    SoftmaxCe {
        logits: Var,
        probs: Vec<f64>,
        labels: Vec<usize>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable input.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same [`Var`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.push(store.get(id).value.clone(), Op::Leaf, true);
        self.params.push((id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::matmul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(y, Op::MatMul(a, b), ng))
    }

    /// Adds `bias: [N]` to every row of a tensor whose last axis is `N`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let mut y = self.value(x).clone();
        ops::add_bias_inplace(&mut y, self.value(bias), "add_bias")?;
        let ng = self.needs(x) || self.needs(bias);
        Ok(self.push(y, Op::AddBias(x, bias), ng))
    }

    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let xw = self.matmul(x, weight)?;
        self.add_bias(xw, bias)
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        ta.expect_same_shape(name, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(ta.shape(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.binary(a, b, "add", |x, y| x + y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(y, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.binary(a, b, "sub", |x, y| x - y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(y, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.binary(a, b, "mul", |x, y| x * y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(y, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let y = self.value(a).map(|v| v * s);
        let ng = self.needs(a);
        self.push(y, Op::Scale(a, s), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = ops::relu(self.value(a));
        let ng = self.needs(a);
        self.push(y, Op::Relu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let y = self.value(a).map(ops::sigmoid);
        let ng = self.needs(a);
        self.push(y, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.value(a).map(f64::tanh);
        let ng = self.needs(a);
        self.push(y, Op::Tanh(a), ng)
    }

    /// Inverted dropout. Identity when `train` is false or `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64, train: bool, rng: Option<&mut Rng>) -> Result<Var> {
        ops::check_dropout_rate(p)?;
        if !train || p == 0.0 {
            return Ok(a);
        }
        let rng = rng.ok_or_else(|| KernelError::InvalidParameter("train-mode dropout needs an rng".into()))?;
        let mask = ops::dropout_mask(self.value(a).len(), p, rng)?;
        let x = self.value(a);
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let y = Tensor::new(x.shape(), data)?;
        let ng = self.needs(a);
        Ok(self.push(y, Op::Dropout(a, mask), ng))
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let cols = ops::conv_columns(self.value(x));
        let y = ops::conv1d_from_columns(self.value(x), self.value(w), self.value(b), &cols)?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(y, Op::Conv1d { x, w, b, cols }, ng))
    }

    /// Train-mode batch norm; returns the output and the batch statistics.
    pub fn batchnorm1d_train(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchNormCache)> {
        let (y, cache) = ops::batchnorm1d_train(self.value(x), self.value(gamma), self.value(beta))?;
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let op = Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat: cache.xhat.clone(),
            inv_std: cache.inv_std.clone(),
            train: true,
        };
        Ok((self.push(y, op, ng), cache))
    }

    pub fn batchnorm1d_eval(&mut self, x: Var, gamma: Var, beta: Var, running_mean: &[f64], running_var: &[f64]) -> Result<Var> {
        let (y, xhat, inv_std) = ops::batchnorm1d_eval(self.value(x), self.value(gamma), self.value(beta), running_mean, running_var)?;
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let op = Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
            train: false,
        };
        Ok(self.push(y, op, ng))
    }

    /// `[A, B, C] -> [A, C, B]`.
    pub fn permute_021(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        x.expect_rank("permute_021", 3)?;
        let y = permute021(x);
        let ng = self.needs(a);
        Ok(self.push(y, Op::Permute021(a), ng))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(a).reshape(shape)?;
        let ng = self.needs(a);
        Ok(self.push(y, Op::Reshape(a), ng))
    }

    /// Row `t` of the middle axis: `[B, T, K] -> [B, K]`.
    pub fn time_step(&mut self, a: Var, t: usize) -> Result<Var> {
        let x = self.value(a);
        x.expect_rank("time_step", 3)?;
        let (b, tt, k) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if t >= tt {
            return Err(KernelError::dim("time_step", format!("index < {tt}"), t));
        }
        let mut data = Vec::with_capacity(b * k);
        for bi in 0..b {
            data.extend_from_slice(&x.data()[(bi * tt + t) * k..(bi * tt + t + 1) * k]);
        }
        let y = Tensor::new(&[b, k], data)?;
        let ng = self.needs(a);
        Ok(self.push(y, Op::TimeStep(a, t), ng))
    }

    /// Columns `start..start+len` of a `[M, N]` tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        x.expect_rank("slice_cols", 2)?;
        let (m, n) = (x.shape()[0], x.shape()[1]);
        if start + len > n || len == 0 {
            return Err(KernelError::dim(
                "slice_cols",
                format!("range within {n}"),
                format!("{start}..{}", start + len),
            ));
        }
        let mut data = Vec::with_capacity(m * len);
        for row in x.data().chunks(n) {
            data.extend_from_slice(&row[start..start + len]);
        }
        let y = Tensor::new(&[m, len], data)?;
        let ng = self.needs(a);
        Ok(self.push(y, Op::SliceCols(a, start), ng))
    }

    /// Stack `T` tensors `[B, K]` into `[B, T, K]`.
    pub fn stack_time(&mut self, steps: &[Var]) -> Result<Var> {
        let first = steps
            .first()
            .ok_or_else(|| KernelError::InvalidParameter("stack_time of zero steps".into()))?;
        let shape = self.value(*first).shape().to_vec();
        if shape.len() != 2 {
            return Err(KernelError::dim("stack_time", "rank 2 steps", format!("{shape:?}")));
        }
        let (b, k, t) = (shape[0], shape[1], steps.len());
        let mut data = vec![0.0; b * t * k];
        for (ti, s) in steps.iter().enumerate() {
            let v = self.value(*s);
            if v.shape() != shape.as_slice() {
                return Err(KernelError::dim("stack_time", format!("{shape:?}"), format!("{:?}", v.shape())));
            }
            for bi in 0..b {
                data[(bi * t + ti) * k..(bi * t + ti + 1) * k].copy_from_slice(&v.data()[bi * k..(bi + 1) * k]);
            }
        }
        let y = Tensor::new(&[b, t, k], data)?;
        let ng = steps.iter().any(|s| self.needs(*s));
        Ok(self.push(y, Op::StackTime(steps.to_vec()), ng))
    }

    /// Concatenate `[M, N_i]` tensors along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = self.value(parts[0]).shape()[0];
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let v = self.value(*p);
            if v.rank() != 2 || v.shape()[0] != m {
                return Err(KernelError::dim("concat_cols", format!("[{m}, _]"), format!("{:?}", v.shape())));
            }
            widths.push(v.shape()[1]);
        }
        let n: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[i * w..(i + 1) * w]);
            }
        }
        let y = Tensor::new(&[m, n], data)?;
        let ng = parts.iter().any(|p| self.needs(*p));
        Ok(self.push(y, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Mean over the last axis: `[B, C, T] -> [B, C]`.
    pub fn mean_time(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        x.expect_rank("mean_time", 3)?;
        let (b, c, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let data = x.data().chunks(t).map(|r| r.iter().sum::<f64>() / t as f64).collect();
        let y = Tensor::new(&[b, c], data)?;
        let ng = self.needs(a);
        Ok(self.push(y, Op::MeanTime(a), ng))
    }

    /// Scalar `sum(a * weights)`.
    pub fn weighted_sum(&mut self, a: Var, weights: Vec<f64>) -> Result<Var> {
        let x = self.value(a);
        if weights.len() != x.len() {
            return Err(KernelError::dim("weighted_sum", x.len(), weights.len()));
        }
        let s = x.data().iter().zip(&weights).map(|(v, w)| v * w).sum();
        let ng = self.needs(a);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum(a, weights), ng))
    }

    /// Identity forward; multiplies the incoming gradient by `-scale` on the way back.
    pub fn grad_reverse(&mut self, a: Var, scale: f64) -> Var {
        let y = self.value(a).clone();
        let ng = self.needs(a);
        self.push(y, Op::GradReverse(a, scale), ng)
    }

    pub fn rmse_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let l = ops::rmse_loss(self.value(pred), target)?;
        let ng = self.needs(pred);
        Ok(self.push(
            Tensor::scalar(l),
            Op::Rmse {
                pred,
                target: target.clone(),
            },
            ng,
        ))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (l, probs) = ops::softmax_cross_entropy(self.value(logits), labels)?;
        let ng = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(l),
            Op::SoftmaxCe {
                logits,
                probs,
                labels: labels.to_vec(),
            },
            ng,
        ))
    }

    /// Gradients of the single-element `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(KernelError::dim("backward", "scalar loss", format!("{:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(lv.shape(), vec![1.0])?);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Run [`Tape::backward`] and add parameter gradients into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let grads = self.backward(loss)?;
        for &(id, v) in &self.params {
            if let Some(g) = grads.get(v) {
                store.get_mut(id).grad.add_assign(g);
            }
        }
        Ok(grads)
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backward_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ga, gb) = ops::matmul_backward(self.value(*a), self.value(*b), g);
                self.acc(grads, *a, ga);
                self.acc(grads, *b, gb);
            }
            Op::AddBias(x, b) => {
                self.acc(grads, *x, g.clone());
                if self.needs(*b) {
                    self.acc(grads, *b, ops::bias_grad(g));
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    self.acc(grads, *a, zip_map(g, vb, |g, y| g * y));
                }
                if self.needs(*b) {
                    self.acc(grads, *b, zip_map(g, va, |g, x| g * x));
                }
            }
            Op::Scale(a, s) => self.acc(grads, *a, g.map(|v| v * s)),
            Op::Relu(a) => {
                let ga = zip_map(g, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                self.acc(grads, *a, ga);
            }
            Op::Sigmoid(a) => self.acc(grads, *a, zip_map(g, &node.value, |g, y| g * y * (1.0 - y))),
            Op::Tanh(a) => self.acc(grads, *a, zip_map(g, &node.value, |g, y| g * (1.0 - y * y))),
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                self.acc(grads, *a, Tensor::new(g.shape(), data).expect("shape"));
            }
            Op::Conv1d { x, w, b, cols } => {
                let (gx, gw, gb) = ops::conv1d_backward(self.value(*x), self.value(*w), cols, g, self.needs(*x));
                if let Some(gx) = gx {
                    self.acc(grads, *x, gx);
                }
                self.acc(grads, *w, gw);
                self.acc(grads, *b, gb);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let (gx, gg, gb) = ops::batchnorm1d_backward(node.value.shape(), self.value(*gamma), xhat, inv_std, g, *train);
                self.acc(grads, *x, gx);
                self.acc(grads, *gamma, gg);
                self.acc(grads, *beta, gb);
            }
            Op::Permute021(a) => self.acc(grads, *a, permute021(g)),
            Op::Reshape(a) => {
                let ga = g.reshape(self.value(*a).shape()).expect("shape");
                self.acc(grads, *a, ga);
            }
            Op::TimeStep(a, t) => {
                if self.needs(*a) {
                    let src = self.value(*a);
                    let (b, tt, k) = (src.shape()[0], src.shape()[1], src.shape()[2]);
                    let mut ga = Tensor::zeros(src.shape());
                    for bi in 0..b {
                        ga.data_mut()[(bi * tt + t) * k..(bi * tt + t + 1) * k].copy_from_slice(&g.data()[bi * k..(bi + 1) * k]);
                    }
                    self.acc(grads, *a, ga);
                }
            }
            Op::SliceCols(a, start) => {
                if self.needs(*a) {
                    let src = self.value(*a);
                    let n = src.shape()[1];
                    let len = g.shape()[1];
                    let mut ga = Tensor::zeros(src.shape());
                    for (dst, row) in ga.data_mut().chunks_mut(n).zip(g.data().chunks(len)) {
                        dst[*start..*start + len].copy_from_slice(row);
                    }
                    self.acc(grads, *a, ga);
                }
            }
            Op::StackTime(steps) => {
                let (b, t, k) = (g.shape()[0], g.shape()[1], g.shape()[2]);
                for (ti, s) in steps.iter().enumerate() {
                    if !self.needs(*s) {
                        continue;
                    }
                    let mut data = Vec::with_capacity(b * k);
                    for bi in 0..b {
                        data.extend_from_slice(&g.data()[(bi * t + ti) * k..(bi * t + ti + 1) * k]);
                    }
                    self.acc(grads, *s, Tensor::new(&[b, k], data).expect("shape"));
                }
            }
            Op::ConcatCols(parts) => {
                let m = g.shape()[0];
                let n = g.shape()[1];
                let mut offset = 0;
                for p in parts {
                    let w = self.value(*p).shape()[1];
                    if self.needs(*p) {
                        let mut data = Vec::with_capacity(m * w);
                        for row in g.data().chunks(n) {
                            data.extend_from_slice(&row[offset..offset + w]);
                        }
                        self.acc(grads, *p, Tensor::new(&[m, w], data).expect("shape"));
                    }
                    offset += w;
                }
            }
            Op::MeanTime(a) => {
                let shape = self.value(*a).shape().to_vec();
                let t = shape[2];
                let mut data = Vec::with_capacity(shape.iter().product());
                for &gv in g.data() {
                    data.resize(data.len() + t, gv / t as f64);
                }
                self.acc(grads, *a, Tensor::new(&shape, data).expect("shape"));
            }
            Op::WeightedSum(a, w) => {
                let s = g.item();
                let data = w.iter().map(|v| v * s).collect();
                let ga = Tensor::new(self.value(*a).shape(), data).expect("shape");
                self.acc(grads, *a, ga);
            }
            Op::GradReverse(a, s) => self.acc(grads, *a, g.map(|v| -s * v)),
            Op::Rmse { pred, target } => {
                let gp = ops::rmse_backward(self.value(*pred), target, node.value.item(), g.item());
                self.acc(grads, *pred, gp);
            }
            Op::SoftmaxCe { logits, probs, labels } => {
                let k = self.value(*logits).shape()[1];
                let gl = ops::softmax_cross_entropy_backward(probs, labels, k, g.item());
                self.acc(grads, *logits, gl);
            }
        }
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape(), data).expect("shape")
}

fn permute021(x: &Tensor) -> Tensor {
    let (a, b, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut data = vec![0.0; x.len()];
    let src = x.data();
    for i in 0..a {
        for j in 0..b {
            for k in 0..c {
                data[(i * c + k) * b + j] = src[(i * b + j) * c + k];
            }
        }
    }
    Tensor::new(&[a, c, b], data).expect("shape")
}
