use crate::error::{KernelError, Result};
use crate::param::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

use super::{uniform_init, ForwardCtx};

/// Hidden states of a recurrent stack.
#[derive(Debug, Clone, Copy)]
pub struct LstmOutput {
    /// `[B, T, H]`
    pub all: Var,
    /// `[B, H]`, the hidden state at the final time step.
    pub last: Var,
}

fn check_input(tape: &Tape, x: Var, op: &'static str, input: usize) -> Result<(usize, usize)> {
    let shape = tape.value(x).shape();
    if shape.len() != 3 || shape[2] != input {
        return Err(KernelError::dim(op, format!("[B, T, {input}]"), format!("{shape:?}")));
    }
    Ok((shape[0], shape[1]))
}

/// Project every time step of `[B, T, D]` at once: `[B, T, G]`.
fn project_inputs(tape: &mut Tape, store: &ParamStore, x: Var, w: ParamId, b: ParamId, b_sz: usize, t: usize) -> Result<Var> {
    let d = tape.value(x).shape()[2];
    let g = store.get(w).value.shape()[1];
    let flat = tape.reshape(x, &[b_sz * t, d])?;
    let w = tape.param(store, w);
    let b = tape.param(store, b);
    let proj = tape.linear(flat, w, b)?;
    tape.reshape(proj, &[b_sz, t, g])
}

/// One LSTM layer with gate order input, forget, cell, output.
#[derive(Debug, Clone)]
struct LstmLayer {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
    input: usize,
    hidden: usize,
}

impl LstmLayer {
    fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w_ih = store.add(
            format!("{name}.w_ih"),
            uniform_init(&[input, 4 * hidden], 1.0 / (input as f64).sqrt(), rng),
        );
        let hb = 1.0 / (hidden as f64).sqrt();
        let w_hh = store.add(format!("{name}.w_hh"), uniform_init(&[hidden, 4 * hidden], hb, rng));
        let mut bias = uniform_init(&[4 * hidden], hb, rng);
        bias.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let bias = store.add(format!("{name}.bias"), bias);
        Self {
            w_ih,
            w_hh,
            bias,
            input,
            hidden,
        }
    }

    fn num_params(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    /// Hidden state per time step, in time order. `reverse` scans from the last step backwards.
    fn run(&self, tape: &mut Tape, store: &ParamStore, x: Var, reverse: bool) -> Result<Vec<Var>> {
        let (b, t) = check_input(tape, x, "lstm", self.input)?;
        let h_sz = self.hidden;
        let proj = project_inputs(tape, store, x, self.w_ih, self.bias, b, t)?;
        let w_hh = tape.param(store, self.w_hh);
        let mut outs: Vec<Option<Var>> = vec![None; t];
        let mut state: Option<(Var, Var)> = None;
        let order: Box<dyn Iterator<Item = usize>> = if reverse { Box::new((0..t).rev()) } else { Box::new(0..t) };
        for ti in order {
            let mut gates = tape.time_step(proj, ti)?;
            if let Some((h, _)) = state {
                let rec = tape.matmul(h, w_hh)?;
                gates = tape.add(gates, rec)?;
            }
            let i = tape.slice_cols(gates, 0, h_sz)?;
            let i = tape.sigmoid(i);
            let f = tape.slice_cols(gates, h_sz, h_sz)?;
            let f = tape.sigmoid(f);
            let g = tape.slice_cols(gates, 2 * h_sz, h_sz)?;
            let g = tape.tanh(g);
            let o = tape.slice_cols(gates, 3 * h_sz, h_sz)?;
            let o = tape.sigmoid(o);
            let ig = tape.mul(i, g)?;
            let c = match state {
                Some((_, c_prev)) => {
                    let fc = tape.mul(f, c_prev)?;
                    tape.add(fc, ig)?
                }
                None => ig,
            };
            let tc = tape.tanh(c);
            let h = tape.mul(o, tc)?;
            outs[ti] = Some(h);
            state = Some((h, c));
        }
        Ok(outs.into_iter().map(|h| h.expect("every step visited")).collect())
    }
}

/// Stacked unidirectional LSTM with dropout between layers in train mode.
#[derive(Debug, Clone)]
pub struct Lstm {
    layers: Vec<LstmLayer>,
    pub hidden: usize,
    pub dropout: f64,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, num_layers: usize, dropout: f64, rng: &mut Rng) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let d = if l == 0 { input } else { hidden };
                LstmLayer::new(store, &format!("{name}.l{l}"), d, hidden, rng)
            })
            .collect();
        Self { layers, hidden, dropout }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LstmLayer::num_params).sum()
    }

    /// `x: [B, T, D]` with zero initial states.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &mut ForwardCtx<'_>, x: Var) -> Result<LstmOutput> {
        let mut input = x;
        let mut steps = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                let train = ctx.is_train();
                input = tape.dropout(input, self.dropout, train, ctx.rng())?;
            }
            steps = layer.run(tape, store, input, false)?;
            input = tape.stack_time(&steps)?;
        }
        Ok(LstmOutput {
            all: input,
            last: *steps.last().expect("at least one step"),
        })
    }
}

/// Stacked bidirectional LSTM. Each layer concatenates forward and backward states.
#[derive(Debug, Clone)]
pub struct BiLstm {
    forward: Vec<LstmLayer>,
    backward: Vec<LstmLayer>,
    pub hidden: usize,
    pub dropout: f64,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, num_layers: usize, dropout: f64, rng: &mut Rng) -> Self {
        let mut forward = Vec::new();
        let mut backward = Vec::new();
        for l in 0..num_layers {
            let d = if l == 0 { input } else { 2 * hidden };
            forward.push(LstmLayer::new(store, &format!("{name}.l{l}.fwd"), d, hidden, rng));
            backward.push(LstmLayer::new(store, &format!("{name}.l{l}.bwd"), d, hidden, rng));
        }
        Self {
            forward,
            backward,
            hidden,
            dropout,
        }
    }

    pub fn num_params(&self) -> usize {
        self.forward.iter().chain(&self.backward).map(LstmLayer::num_params).sum()
    }

    /// Returns `[B, 2H]`: the forward state after the last step joined with the backward state after the first.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &mut ForwardCtx<'_>, x: Var) -> Result<Var> {
        let mut input = x;
        let mut ends = None;
        for (l, (fw, bw)) in self.forward.iter().zip(&self.backward).enumerate() {
            if l > 0 {
                let train = ctx.is_train();
                input = tape.dropout(input, self.dropout, train, ctx.rng())?;
            }
            let hf = fw.run(tape, store, input, false)?;
            let hb = bw.run(tape, store, input, true)?;
            let joined = hf
                .iter()
                .zip(&hb)
                .map(|(a, b)| tape.concat_cols(&[*a, *b]))
                .collect::<Result<Vec<_>>>()?;
            input = tape.stack_time(&joined)?;
            ends = Some((*hf.last().expect("steps"), hb[0]));
        }
        let (f_last, b_first) = ends.expect("at least one layer");
        tape.concat_cols(&[f_last, b_first])
    }
}

/// One GRU layer, gate order reset, update, new.
#[derive(Debug, Clone)]
struct GruLayer {
    w_ih: ParamId,
    b_ih: ParamId,
    w_hh: ParamId,
    b_hh: ParamId,
    input: usize,
    hidden: usize,
}

impl GruLayer {
    fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let hb = 1.0 / (hidden as f64).sqrt();
        Self {
            w_ih: store.add(
                format!("{name}.w_ih"),
                uniform_init(&[input, 3 * hidden], 1.0 / (input as f64).sqrt(), rng),
            ),
            b_ih: store.add(format!("{name}.b_ih"), uniform_init(&[3 * hidden], hb, rng)),
            w_hh: store.add(format!("{name}.w_hh"), uniform_init(&[hidden, 3 * hidden], hb, rng)),
            b_hh: store.add(format!("{name}.b_hh"), uniform_init(&[3 * hidden], hb, rng)),
            input,
            hidden,
        }
    }

    fn num_params(&self) -> usize {
        3 * self.hidden * (self.input + self.hidden + 2)
    }

    fn run(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Vec<Var>> {
        let (b, t) = check_input(tape, x, "gru", self.input)?;
        let h_sz = self.hidden;
        let proj = project_inputs(tape, store, x, self.w_ih, self.b_ih, b, t)?;
        let w_hh = tape.param(store, self.w_hh);
        let b_hh = tape.param(store, self.b_hh);
        let mut h = tape.constant(Tensor::zeros(&[b, h_sz]));
        let mut outs = Vec::with_capacity(t);
        for ti in 0..t {
            let gx = tape.time_step(proj, ti)?;
            let gh = tape.linear(h, w_hh, b_hh)?;
            let xr = tape.slice_cols(gx, 0, h_sz)?;
            let hr = tape.slice_cols(gh, 0, h_sz)?;
            let r = tape.add(xr, hr)?;
            let r = tape.sigmoid(r);
            let xz = tape.slice_cols(gx, h_sz, h_sz)?;
            let hz = tape.slice_cols(gh, h_sz, h_sz)?;
            let z = tape.add(xz, hz)?;
            let z = tape.sigmoid(z);
            let xn = tape.slice_cols(gx, 2 * h_sz, h_sz)?;
            let hn = tape.slice_cols(gh, 2 * h_sz, h_sz)?;
            let rn = tape.mul(r, hn)?;
            let n = tape.add(xn, rn)?;
            let n = tape.tanh(n);
            // h' = (1 - z) n + z h = n + z (h - n)
            let diff = tape.sub(h, n)?;
            let zd = tape.mul(z, diff)?;
            h = tape.add(n, zd)?;
            outs.push(h);
        }
        Ok(outs)
    }
}

/// Stacked GRU with dropout between layers in train mode.
#[derive(Debug, Clone)]
pub struct Gru {
    layers: Vec<GruLayer>,
    pub hidden: usize,
    pub dropout: f64,
}

impl Gru {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, num_layers: usize, dropout: f64, rng: &mut Rng) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let d = if l == 0 { input } else { hidden };
                GruLayer::new(store, &format!("{name}.l{l}"), d, hidden, rng)
            })
            .collect();
        Self { layers, hidden, dropout }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(GruLayer::num_params).sum()
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &mut ForwardCtx<'_>, x: Var) -> Result<LstmOutput> {
        let mut input = x;
        let mut steps = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                let train = ctx.is_train();
                input = tape.dropout(input, self.dropout, train, ctx.rng())?;
            }
            steps = layer.run(tape, store, input)?;
            input = tape.stack_time(&steps)?;
        }
        Ok(LstmOutput {
            all: input,
            last: *steps.last().expect("at least one step"),
        })
    }
}
