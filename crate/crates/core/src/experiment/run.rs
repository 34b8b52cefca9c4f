use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sleepcast_kernel::{derive_seed, Rng};

use super::eval::{mean_predictor_rmse, predict, rmse};
use super::folds::{loso_folds, DomainIndex, FoldSpec};
use super::train::{train, TrainConfig, TrainOutcome};
use crate::data::{Normalizer, SubjectDataset, SubjectId};
use crate::error::{Error, Result};
use crate::model::{Dims, HyperParams, Model, ModelKind};
use crate::window::{slide_all, WindowConfig, WindowedInstance};

/// Instances of one fold, normalized with statistics of the training subjects only.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub fold: FoldSpec,
    pub normalizer: Normalizer,
    pub train: Vec<WindowedInstance>,
    pub val: Vec<WindowedInstance>,
    pub test: Vec<WindowedInstance>,
}

fn pick<'a>(datasets: &'a [SubjectDataset], ids: &[SubjectId]) -> Result<Vec<&'a SubjectDataset>> {
    ids.iter()
        .map(|id| {
            datasets.iter().find(|d| d.subject == *id).ok_or_else(|| Error::Data {
                subject: *id,
                message: "subject not present in the dataset".into(),
            })
        })
        .collect()
}

pub fn prepare_fold(datasets: &[SubjectDataset], fold: &FoldSpec, window: &WindowConfig) -> Result<FoldData> {
    fold.check()?;
    let train_ds = pick(datasets, &fold.train)?;
    let normalizer = Normalizer::fit(&train_ds)?;
    let windows = |group: Vec<&SubjectDataset>| -> Result<Vec<WindowedInstance>> {
        let normalized = group.iter().map(|d| normalizer.apply(d)).collect::<Result<Vec<_>>>()?;
        slide_all(&normalized, window)
    };
    Ok(FoldData {
        train: windows(train_ds)?,
        val: windows(pick(datasets, &[fold.val])?)?,
        test: windows(pick(datasets, &[fold.test])?)?,
        normalizer,
        fold: fold.clone(),
    })
}

/// Which subjects fed each stage of one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageAudit {
    pub normalizer_fitted_on: Vec<SubjectId>,
    pub train_domains: Vec<SubjectId>,
    pub val_domains: Vec<SubjectId>,
    pub test_domains: Vec<SubjectId>,
}

fn domains_of(instances: &[WindowedInstance]) -> Vec<SubjectId> {
    instances.iter().map(|i| i.domain).collect::<BTreeSet<_>>().into_iter().collect()
}

impl FoldData {
    pub fn audit(&self) -> LineageAudit {
        LineageAudit {
            normalizer_fitted_on: self.normalizer.fitted_on.clone(),
            train_domains: domains_of(&self.train),
            val_domains: domains_of(&self.val),
            test_domains: domains_of(&self.test),
        }
    }
}

impl LineageAudit {
    /// Fails when a validation or test subject reached training or normalizer fitting.
    pub fn verify(&self, fold: &FoldSpec) -> Result<()> {
        let held_out = [fold.test, fold.val];
        for (stage, ids) in [
            ("normalizer fitting", &self.normalizer_fitted_on),
            ("training", &self.train_domains),
        ] {
            if let Some(s) = ids.iter().find(|s| held_out.contains(s) || !fold.train.contains(s)) {
                return Err(Error::Lineage(format!(
                    "subject {s} reached {stage} in the fold testing {}",
                    fold.test
                )));
            }
        }
        if self.test_domains.iter().any(|s| *s != fold.test) || self.val_domains.iter().any(|s| *s != fold.val) {
            return Err(Error::Lineage(format!(
                "held-out instances of the fold testing {} are mixed",
                fold.test
            )));
        }
        Ok(())
    }
}

/// Truth and prediction for the days following one window, in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub subject: SubjectId,
    /// First target day.
    pub date: NaiveDate,
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

fn series(model: &Model, instances: &[WindowedInstance]) -> Result<Vec<SeriesPoint>> {
    Ok(predict(model, instances)?
        .into_iter()
        .zip(instances)
        .map(|(p, i)| SeriesPoint {
            subject: i.domain,
            date: i.start + Days::new(i.window as u64),
            truth: i.y.data().to_vec(),
            predicted: p,
        })
        .collect())
}

/// Outcome of training and testing one model on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub model: ModelKind,
    pub window: usize,
    pub horizon: usize,
    pub fold: FoldSpec,
    pub seed: u64,
    pub hyperparams: HyperParams,
    pub train_instances: usize,
    pub val_instances: usize,
    pub test_instances: usize,
    pub training: TrainOutcome,
    pub val_rmse: Option<f64>,
    pub test_rmse: f64,
    /// RMSE of predicting the test subject's own mean target.
    pub subject_mean_rmse: f64,
    pub lineage: LineageAudit,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub val_series: Vec<SeriesPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_series: Vec<SeriesPoint>,
    /// Not serialized, so results files stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl TrialResult {
    pub fn epochs_completed(&self) -> usize {
        self.training.history.len()
    }
}

/// Everything fixed across the folds of one (model, W, H) configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub model: ModelKind,
    pub hyperparams: HyperParams,
    pub window: WindowConfig,
    pub train: TrainConfig,
    pub master_seed: u64,
    /// Keep per-day predictions in the results.
    pub keep_series: bool,
}

impl FoldPlan {
    pub fn fold_seed(&self, test: SubjectId) -> u64 {
        let kind = ModelKind::ALL.iter().position(|k| *k == self.model).expect("listed kind") as u64;
        derive_seed(
            self.master_seed,
            &[kind, self.window.window as u64, self.window.horizon as u64, u64::from(test.0)],
        )
    }
}

/// Prepare, train and test one fold with a freshly initialized model.
pub fn run_fold(datasets: &[SubjectDataset], domains: &DomainIndex, fold: &FoldSpec, plan: &FoldPlan) -> Result<(TrialResult, Model)> {
    let started = Instant::now();
    let data = prepare_fold(datasets, fold, &plan.window)?;
    let lineage = data.audit();
    lineage.verify(fold)?;
    if data.test.is_empty() {
        return Err(Error::NoInstances("test on"));
    }
    let seed = plan.fold_seed(fold.test);
    let dims = Dims {
        features: data.normalizer.feature_names.len(),
        window: plan.window.window,
        horizon: plan.window.horizon,
        domains: domains.len(),
    };
    let mut model = Model::new(plan.model, &plan.hyperparams, dims, &mut Rng::new(derive_seed(seed, &[0])))?;
    model.feature_names = data.normalizer.feature_names.clone();
    let cfg = TrainConfig {
        alpha: plan.hyperparams.alpha,
        batch_size: plan.hyperparams.batch_size,
        seed: derive_seed(seed, &[1]),
        label: format!(
            "{} W={} H={} test {}: ",
            plan.model, plan.window.window, plan.window.horizon, fold.test
        ),
        ..plan.train.clone()
    };
    let training = train(&mut model, &data.train, &data.val, domains, &cfg)?;

    let test_pred = predict(&model, &data.test)?;
    let truth: Vec<f64> = data.test.iter().flat_map(|i| i.y.data().iter().copied()).collect();
    let test_rmse = rmse(&test_pred.concat(), &truth)?;
    let val_rmse = if data.val.is_empty() {
        None
    } else {
        Some(super::eval::evaluate(&model, &data.val)?)
    };
    let (val_series, test_series) = if plan.keep_series {
        (series(&model, &data.val)?, series(&model, &data.test)?)
    } else {
        (Vec::new(), Vec::new())
    };
    let result = TrialResult {
        model: plan.model,
        window: plan.window.window,
        horizon: plan.window.horizon,
        fold: fold.clone(),
        seed,
        hyperparams: plan.hyperparams.clone(),
        train_instances: data.train.len(),
        val_instances: data.val.len(),
        test_instances: data.test.len(),
        training,
        val_rmse,
        test_rmse,
        subject_mean_rmse: mean_predictor_rmse(&data.test)?,
        lineage,
        val_series,
        test_series,
        wall_time: started.elapsed(),
    };
    log::info!(
        "{} W={} H={} test subject {}: test RMSE {:.4}",
        plan.model,
        plan.window.window,
        plan.window.horizon,
        fold.test,
        test_rmse
    );
    Ok((result, model))
}

/// Datasets sorted by subject id, so downstream results do not depend on input order.
pub fn sorted_datasets(datasets: &[SubjectDataset]) -> Vec<SubjectDataset> {
    let mut v = datasets.to_vec();
    v.sort_by_key(|d| d.subject);
    v
}

/// All LOSO folds of one plan, in test-subject order. Folds run on the current rayon pool.
pub fn run_loso(datasets: &[SubjectDataset], plan: &FoldPlan) -> Result<Vec<(TrialResult, Model)>> {
    let datasets = sorted_datasets(datasets);
    let ids: Vec<SubjectId> = datasets.iter().map(|d| d.subject).collect();
    let domains = DomainIndex::new(&ids);
    let folds = loso_folds(&ids)?;
    folds.par_iter().map(|f| run_fold(&datasets, &domains, f, plan)).collect()
}
