use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sleepcast_kernel::layers::{BatchNorm1d, BiLstm, Conv1d, Gru, Linear, Lstm};
use sleepcast_kernel::{ForwardCtx, HasParams, KernelError, ParamStore, Rng, Tape, Var};

use super::HyperParams;
use crate::error::{Error, Result};

/// Problem dimensions a model is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub features: usize,
    pub window: usize,
    pub horizon: usize,
    /// Domain classes; unused by baselines.
    pub domains: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    AdaSt,
    Mlp,
    Cnn,
    BiLstm,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Mlp,
    Cnn,
    BiLstm,
    Gru,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [BaselineKind::Mlp, BaselineKind::Cnn, BaselineKind::BiLstm, BaselineKind::Gru];
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::AdaSt, ModelKind::Mlp, ModelKind::Cnn, ModelKind::BiLstm, ModelKind::Gru];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::AdaSt => "adast",
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
            ModelKind::BiLstm => "bilstm",
            ModelKind::Gru => "gru",
        }
    }

    pub fn has_domain_head(self) -> bool {
        self == ModelKind::AdaSt
    }
}

impl From<BaselineKind> for ModelKind {
    fn from(k: BaselineKind) -> Self {
        match k {
            BaselineKind::Mlp => ModelKind::Mlp,
            BaselineKind::Cnn => ModelKind::Cnn,
            BaselineKind::BiLstm => ModelKind::BiLstm,
            BaselineKind::Gru => ModelKind::Gru,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(ModelKind::from(*self).name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model kind {s:?} (expected adast, mlp, cnn, bilstm or gru)")))
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| ModelKind::from(*k).name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown baseline {s:?} (expected mlp, cnn, bilstm or gru)")))
    }
}

/// Conv1d (+ batch norm) + ReLU + dropout, once or twice.
#[derive(Debug, Clone)]
pub struct ConvStack {
    pub conv1: Conv1d,
    pub bn1: Option<BatchNorm1d>,
    pub conv2: Option<Conv1d>,
    pub bn2: Option<BatchNorm1d>,
    pub dropout: f64,
}

impl ConvStack {
    fn new(store: &mut ParamStore, hp: &HyperParams, features: usize, rng: &mut Rng) -> Self {
        let c = hp.cnn_hidden_size;
        let conv1 = Conv1d::new(store, "conv.conv1", features, c, rng);
        let bn1 = hp.use_batchnorm.then(|| BatchNorm1d::new(store, "conv.bn1", c));
        let (conv2, bn2) = if hp.num_conv_layers >= 2 {
            let conv2 = Conv1d::new(store, "conv.conv2", c, 2 * c, rng);
            (Some(conv2), hp.use_batchnorm.then(|| BatchNorm1d::new(store, "conv.bn2", 2 * c)))
        } else {
            (None, None)
        };
        Self {
            conv1,
            bn1,
            conv2,
            bn2,
            dropout: hp.dropout_cnn,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.as_ref().unwrap_or(&self.conv1).out_channels
    }

    /// `[B, W, F] -> [B, C, W]`.
    fn forward_channels(&self, tape: &mut Tape, store: &ParamStore, ctx: &mut ForwardCtx<'_>, x: Var) -> Result<Var> {
        let mut h = tape.permute_021(x)?;
        for (conv, bn) in std::iter::once((&self.conv1, &self.bn1)).chain(self.conv2.as_ref().map(|c| (c, &self.bn2))) {
            h = conv.forward(tape, store, h)?;
            if let Some(bn) = bn {
                h = bn.forward(tape, store, ctx, h)?;
            }
            h = tape.relu(h);
            let train = ctx.is_train();
            h = tape.dropout(h, self.dropout, train, ctx.rng())?;
        }
        Ok(h)
    }

    /// `[B, W, F] -> [B, W, C]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &mut ForwardCtx<'_>, x: Var) -> Result<Var> {
        let h = self.forward_channels(tape, store, ctx, x)?;
        Ok(tape.permute_021(h)?)
    }
}

#[derive(Debug, Clone)]
enum Net {
    AdaSt {
        conv: ConvStack,
        lstm: Lstm,
        head: Linear,
        domain_head: Linear,
    },
    Mlp {
        fc1: Linear,
        fc2: Linear,
        head: Linear,
        dropout: f64,
    },
    Cnn {
        conv: ConvStack,
        head: Linear,
    },
    BiLstm {
        rnn: BiLstm,
        head: Linear,
    },
    Gru {
        rnn: Gru,
        head: Linear,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOut {
    /// `[B, H]`
    pub y: Var,
    /// `[B, K]` logits, when requested from a model with a domain head.
    pub domain: Option<Var>,
}

/// A forecasting network together with its parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub hyperparams: HyperParams,
    pub dims: Dims,
    /// Column names of the training features, carried into checkpoints.
    pub feature_names: Vec<String>,
    store: ParamStore,
    net: Net,
}

impl HasParams for Model {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

/// Build the conv-recurrent forecaster with a domain head. `hp` must lie in the search grid.
pub fn build_adast(hp: &HyperParams, dims: Dims, rng: &mut Rng) -> Result<Model> {
    hp.validate()?;
    Model::new(ModelKind::AdaSt, hp, dims, rng)
}

pub fn build_baseline(kind: BaselineKind, hp: &HyperParams, dims: Dims, rng: &mut Rng) -> Result<Model> {
    hp.validate()?;
    Model::new(kind.into(), hp, dims, rng)
}

impl Model {
    /// Like [`build_adast`] and [`build_baseline`] but accepts widths outside the search grid.
    pub fn new(kind: ModelKind, hp: &HyperParams, dims: Dims, rng: &mut Rng) -> Result<Self> {
        hp.validate_structure()?;
        if dims.features == 0 || dims.window == 0 || dims.horizon == 0 {
            return Err(Error::InvalidParameter(format!(
                "feature, window and horizon sizes must be positive: {dims:?}"
            )));
        }
        if kind.has_domain_head() && dims.domains < 2 {
            return Err(Error::InvalidParameter(format!(
                "domain head needs at least 2 domains, got {}",
                dims.domains
            )));
        }
        let mut store = ParamStore::new();
        let s = &mut store;
        let (f, hl, h) = (dims.features, hp.lstm_hidden_size, dims.horizon);
        let net = match kind {
            ModelKind::AdaSt => {
                let conv = ConvStack::new(s, hp, f, rng);
                let lstm = Lstm::new(s, "lstm", conv.out_channels(), hl, hp.num_lstm_layers, hp.dropout_lstm, rng);
                let head = Linear::new(s, "head", hl, h, rng);
                let domain_head = Linear::new(s, "domain_head", hl, dims.domains, rng);
                Net::AdaSt {
                    conv,
                    lstm,
                    head,
                    domain_head,
                }
            }
            ModelKind::Mlp => Net::Mlp {
                fc1: Linear::new(s, "mlp.fc1", dims.window * f, hl, rng),
                fc2: Linear::new(s, "mlp.fc2", hl, hl, rng),
                head: Linear::new(s, "head", hl, h, rng),
                dropout: hp.dropout_lstm,
            },
            ModelKind::Cnn => {
                let conv = ConvStack::new(s, hp, f, rng);
                let head = Linear::new(s, "head", conv.out_channels(), h, rng);
                Net::Cnn { conv, head }
            }
            ModelKind::BiLstm => Net::BiLstm {
                rnn: BiLstm::new(s, "bilstm", f, hl, hp.num_lstm_layers, hp.dropout_lstm, rng),
                head: Linear::new(s, "head", 2 * hl, h, rng),
            },
            ModelKind::Gru => Net::Gru {
                rnn: Gru::new(s, "gru", f, hl, hp.num_lstm_layers, hp.dropout_lstm, rng),
                head: Linear::new(s, "head", hl, h, rng),
            },
        };
        Ok(Self {
            kind,
            hyperparams: hp.clone(),
            dims,
            feature_names: Vec::new(),
            store,
            net,
        })
    }

    pub fn has_domain_head(&self) -> bool {
        self.kind.has_domain_head()
    }

    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    /// Conv output width; `None` for models without a conv stack.
    pub fn final_channels(&self) -> Option<usize> {
        match &self.net {
            Net::AdaSt { conv, .. } | Net::Cnn { conv, .. } => Some(conv.out_channels()),
            _ => None,
        }
    }

    /// Input width of the regression head.
    pub fn head_inputs(&self) -> usize {
        match &self.net {
            Net::AdaSt { head, .. } | Net::Mlp { head, .. } | Net::Cnn { head, .. } | Net::BiLstm { head, .. } | Net::Gru { head, .. } => {
                head.in_features
            }
        }
    }

    /// Input width of the first layer that sees raw features.
    pub fn input_width(&self) -> usize {
        match &self.net {
            Net::Mlp { fc1, .. } => fc1.in_features,
            _ => self.dims.features,
        }
    }

    /// `x: [B, W, F]`. Batch norm running-stat updates are queued on `ctx`.
    pub fn forward(&self, tape: &mut Tape, ctx: &mut ForwardCtx<'_>, x: Var, return_domain: bool) -> Result<ForwardOut> {
        let shape = tape.value(x).shape().to_vec();
        let window_ok = self.kind != ModelKind::Mlp || shape.get(1) == Some(&self.dims.window);
        if shape.len() != 3 || shape[2] != self.dims.features || !window_ok {
            return Err(KernelError::dim(
                "model input",
                format!("[B, {}, {}]", self.dims.window, self.dims.features),
                format!("{shape:?}"),
            )
            .into());
        }
        let s = &self.store;
        match &self.net {
            Net::AdaSt {
                conv,
                lstm,
                head,
                domain_head,
            } => {
                let h = conv.forward(tape, s, ctx, x)?;
                let last = lstm.forward(tape, s, ctx, h)?.last;
                let y = head.forward(tape, s, last)?;
                let domain = if return_domain {
                    let feat = if self.hyperparams.gradient_reversal {
                        tape.grad_reverse(last, 1.0)
                    } else {
                        last
                    };
                    Some(domain_head.forward(tape, s, feat)?)
                } else {
                    None
                };
                Ok(ForwardOut { y, domain })
            }
            Net::Mlp { fc1, fc2, head, dropout } => {
                let flat = tape.reshape(x, &[shape[0], shape[1] * shape[2]])?;
                let mut h = flat;
                for fc in [fc1, fc2] {
                    h = fc.forward(tape, s, h)?;
                    h = tape.relu(h);
                    let train = ctx.is_train();
                    h = tape.dropout(h, *dropout, train, ctx.rng())?;
                }
                Ok(ForwardOut {
                    y: head.forward(tape, s, h)?,
                    domain: None,
                })
            }
            Net::Cnn { conv, head } => {
                let h = conv.forward_channels(tape, s, ctx, x)?;
                let pooled = tape.mean_time(h)?;
                Ok(ForwardOut {
                    y: head.forward(tape, s, pooled)?,
                    domain: None,
                })
            }
            Net::BiLstm { rnn, head } => {
                let h = rnn.forward(tape, s, ctx, x)?;
                Ok(ForwardOut {
                    y: head.forward(tape, s, h)?,
                    domain: None,
                })
            }
            Net::Gru { rnn, head } => {
                let h = rnn.forward(tape, s, ctx, x)?.last;
                Ok(ForwardOut {
                    y: head.forward(tape, s, h)?,
                    domain: None,
                })
            }
        }
    }
}

fn lstm_params(input: usize, hidden: usize, layers: usize) -> usize {
    (0..layers)
        .map(|l| {
            let d = if l == 0 { input } else { hidden };
            4 * hidden * (d + hidden) + 4 * hidden
        })
        .sum()
}

fn conv_params(hp: &HyperParams, f: usize) -> usize {
    let c = hp.cnn_hidden_size;
    let bn = usize::from(hp.use_batchnorm);
    let mut n = 3 * f * c + c + bn * 2 * c;
    if hp.num_conv_layers >= 2 {
        n += 3 * c * 2 * c + 2 * c + bn * 4 * c;
    }
    n
}

/// Closed-form number of trainable scalars.
pub fn param_count(kind: ModelKind, hp: &HyperParams, dims: &Dims) -> usize {
    let (f, hl, h, k) = (dims.features, hp.lstm_hidden_size, dims.horizon, dims.domains);
    let nl = hp.num_lstm_layers;
    match kind {
        ModelKind::AdaSt => conv_params(hp, f) + lstm_params(hp.final_channels(), hl, nl) + (hl * h + h) + (hl * k + k),
        ModelKind::Mlp => (dims.window * f * hl + hl) + (hl * hl + hl) + (hl * h + h),
        ModelKind::Cnn => conv_params(hp, f) + hp.final_channels() * h + h,
        ModelKind::BiLstm => {
            let l0 = 2 * lstm_params(f, hl, 1);
            let rest = 2 * (1..nl).map(|_| 4 * hl * (2 * hl + hl) + 4 * hl).sum::<usize>();
            l0 + rest + 2 * hl * h + h
        }
        ModelKind::Gru => {
            let per = |d: usize| 3 * hl * d + 3 * hl * hl + 6 * hl;
            per(f) + (1..nl).map(|_| per(hl)).sum::<usize>() + hl * h + h
        }
    }
}
