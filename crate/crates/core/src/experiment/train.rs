use serde::{Deserialize, Serialize};
use sleepcast_kernel::{derive_seed, AdamConfig, AdamState, ForwardCtx, HasParams, ParamStore, Rng, Tape, Tensor, Var};

use super::folds::DomainIndex;
use crate::error::{Error, Result};
use crate::model::{ForwardOut, Model};
use crate::window::{batches, Batch, WindowedInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Weight of the domain-classification loss.
    pub alpha: f64,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Add the domain-classification term when the model has a domain head.
    pub domain_loss: bool,
    /// Keep per-step loss values in the outcome.
    pub record_steps: bool,
    /// Prefix for progress lines.
    #[serde(skip)]
    pub label: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 1e-3,
            weight_decay: 1e-5,
            alpha: 0.1,
            batch_size: 32,
            patience: 10,
            seed: 0,
            domain_loss: true,
            record_steps: false,
            label: String::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::InvalidParameter("epochs, batch_size and patience must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie in [0, 1]", self.alpha)));
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter("lr must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_main: f64,
    pub train_dom: Option<f64>,
    pub val_main: Option<f64>,
    pub val_dom: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub batch: usize,
    pub main: f64,
    pub dom: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepRecord>,
}

/// Tracks the best monitored value and epochs since it improved.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    /// Returns true when `value` is a new best.
    pub fn update(&mut self, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }
}

/// Tape nodes of the training loss.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    /// RMSE of the forecast.
    pub main: Var,
    /// Domain cross-entropy, when domain labels and logits are both present.
    pub dom: Option<Var>,
    /// `main + alpha * dom`, or `main` alone.
    pub total: Var,
}

pub fn objective(tape: &mut Tape, out: &ForwardOut, y: &Tensor, labels: Option<&[usize]>, alpha: f64) -> Result<Objective> {
    let main = tape.rmse_loss(out.y, y)?;
    Ok(match (labels, out.domain) {
        (Some(labels), Some(logits)) => {
            let dom = tape.softmax_cross_entropy(logits, labels)?;
            let weighted = tape.scale(dom, alpha);
            Objective {
                main,
                dom: Some(dom),
                total: tape.add(main, weighted)?,
            }
        }
        _ => Objective {
            main,
            dom: None,
            total: main,
        },
    })
}

struct Losses {
    main: f64,
    dom: Option<f64>,
}

fn diverged(epoch: usize, batch: usize, what: &str, v: f64) -> Error {
    Error::Diverged {
        epoch,
        batch,
        detail: format!("{what} = {v}"),
    }
}

/// One optimizer step on `batch`; returns the loss values before the update.
#[allow(clippy::too_many_arguments)]
fn train_step(
    model: &mut Model,
    batch: &Batch,
    labels: Option<&[usize]>,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    dropout_rng: &mut Rng,
    epoch: usize,
    index: usize,
) -> Result<(Losses, f64)> {
    let mut tape = Tape::new();
    let x = tape.constant(batch.x.clone());
    let mut ctx = ForwardCtx::train(dropout_rng);
    let out = model.forward(&mut tape, &mut ctx, x, labels.is_some())?;
    let Objective { main, dom, total } = objective(&mut tape, &out, &batch.y, labels, cfg.alpha)?;
    let losses = Losses {
        main: tape.value(main).item(),
        dom: dom.map(|d| tape.value(d).item()),
    };
    let total_v = tape.value(total).item();
    for (what, v) in [("L_main", Some(losses.main)), ("L_dom", losses.dom), ("L", Some(total_v))] {
        if let Some(v) = v.filter(|v| !v.is_finite()) {
            return Err(diverged(epoch, index, what, v));
        }
    }
    let store = model.store_mut();
    store.zero_grad();
    tape.backward_into(total, store)?;
    if let Some((i, p)) = store.params().iter().enumerate().find(|(_, p)| !p.grad.is_finite()) {
        return Err(diverged(epoch, index, &format!("gradient of {} (#{i})", p.name), f64::NAN));
    }
    ctx.commit(store);
    adam.step(store, &cfg.adam())?;
    Ok((losses, total_v))
}

/// Eval-mode losses over `instances`: exact RMSE and mean cross-entropy.
fn eval_losses(model: &Model, instances: &[WindowedInstance], domains: Option<&DomainIndex>) -> Result<Losses> {
    let use_dom = domains.is_some() && model.has_domain_head();
    let mut sse = 0.0;
    let mut n = 0usize;
    let mut ce = 0.0;
    for b in batches(instances, 256, None)? {
        let mut tape = Tape::new();
        let x = tape.constant(b.x.clone());
        let out = model.forward(&mut tape, &mut ForwardCtx::eval(), x, use_dom)?;
        for (p, t) in tape.value(out.y).data().iter().zip(b.y.data()) {
            sse += (p - t) * (p - t);
        }
        n += b.y.len();
        if let (Some(d), Some(logits)) = (domains, out.domain) {
            let l = tape.softmax_cross_entropy(logits, &d.labels(&b.domains)?)?;
            ce += tape.value(l).item() * b.size() as f64;
        }
    }
    Ok(Losses {
        main: (sse / n as f64).sqrt(),
        dom: use_dom.then(|| ce / instances.len() as f64),
    })
}

/// Train with `L_main + alpha * L_dom`, validating after every epoch.
///
/// Parameters from the epoch with the lowest validation `L_main` are restored
/// at the end. Without validation instances the training `L_main` is monitored.
pub fn train(
    model: &mut Model,
    train_set: &[WindowedInstance],
    val_set: &[WindowedInstance],
    domains: &DomainIndex,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::NoInstances("train on"));
    }
    let use_dom = cfg.domain_loss && model.has_domain_head();
    let mut shuffle_rng = Rng::new(derive_seed(cfg.seed, &[0]));
    let mut dropout_rng = Rng::new(derive_seed(cfg.seed, &[1]));
    let mut adam = AdamState::new(model.store());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best: Option<(usize, ParamStore)> = None;
    let mut history = Vec::new();
    let mut steps = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let mut main_sum = 0.0;
        let mut dom_sum = 0.0;
        for (i, b) in batches(train_set, cfg.batch_size, Some(&mut shuffle_rng))?.iter().enumerate() {
            let labels = if use_dom { Some(domains.labels(&b.domains)?) } else { None };
            let (l, total) = train_step(model, b, labels.as_deref(), cfg, &mut adam, &mut dropout_rng, epoch, i)?;
            main_sum += l.main * b.size() as f64;
            dom_sum += l.dom.unwrap_or(0.0) * b.size() as f64;
            if cfg.record_steps {
                steps.push(StepRecord {
                    epoch,
                    batch: i,
                    main: l.main,
                    dom: l.dom,
                    total,
                });
            }
        }
        let n = train_set.len() as f64;
        let val = if val_set.is_empty() {
            None
        } else {
            Some(eval_losses(model, val_set, use_dom.then_some(domains))?)
        };
        let record = EpochRecord {
            epoch,
            train_main: main_sum / n,
            train_dom: use_dom.then(|| dom_sum / n),
            val_main: val.as_ref().map(|v| v.main),
            val_dom: val.and_then(|v| v.dom),
        };
        log::info!(
            "{}epoch {:>3}  train L_main {:.5}  val L_main {}",
            cfg.label,
            epoch + 1,
            record.train_main,
            record.val_main.map_or("-".into(), |v| format!("{v:.5}"))
        );
        let monitored = record.val_main.unwrap_or(record.train_main);
        history.push(record);
        if stopper.update(monitored) {
            best = Some((epoch, model.store().clone()));
        } else if stopper.should_stop() {
            stopped_early = epoch + 1 < cfg.epochs;
            break;
        }
    }
    let best_epoch = match best {
        Some((epoch, store)) => {
            model.store_mut().copy_values_from(&store)?;
            epoch
        }
        // unreachable unless every monitored value was NaN
        None => history.len() - 1,
    };
    Ok(TrainOutcome {
        history,
        best_epoch,
        stopped_early,
        steps,
    })
}
