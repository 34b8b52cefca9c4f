use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{loso_folds, DomainIndex};
use super::run::{run_fold, sorted_datasets, FoldPlan, TrialResult};
use super::train::TrainConfig;
use crate::data::{SubjectDataset, SubjectId};
use crate::error::{Error, Result};
use crate::model::{HyperParams, ModelKind};
use crate::window::{WindowConfig, HORIZONS, WINDOWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub windows: Vec<usize>,
    pub horizons: Vec<usize>,
    pub models: Vec<ModelKind>,
    pub hyperparams: HyperParams,
    pub train: TrainConfig,
    pub master_seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            windows: WINDOWS.to_vec(),
            horizons: HORIZONS.to_vec(),
            models: vec![ModelKind::AdaSt],
            hyperparams: HyperParams::default(),
            train: TrainConfig::default(),
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject: SubjectId,
    pub test_rmse: f64,
    pub val_rmse: Option<f64>,
    pub subject_mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub test: SubjectId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub model: ModelKind,
    pub window: usize,
    pub horizon: usize,
    /// Arithmetic mean of `per_subject[..].test_rmse`.
    pub mean_test_rmse: f64,
    pub mean_val_rmse: Option<f64>,
    pub mean_subject_mean_rmse: f64,
    pub per_subject: Vec<SubjectScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedFold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyCell {
    pub model: ModelKind,
    pub window: usize,
    pub horizon: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub empty: Vec<EmptyCell>,
}

impl GridResult {
    pub fn cell(&self, model: ModelKind, window: usize, horizon: usize) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.window == window && c.horizon == horizon)
    }

    /// Lowest mean test RMSE for `model`.
    pub fn best(&self, model: ModelKind) -> Option<&GridCell> {
        self.cells
            .iter()
            .filter(|c| c.model == model)
            .min_by(|a, b| a.mean_test_rmse.total_cmp(&b.mean_test_rmse))
    }

    pub fn models(&self) -> Vec<ModelKind> {
        let mut m: Vec<ModelKind> = self.cells.iter().map(|c| c.model).collect();
        m.sort();
        m.dedup();
        m
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn longest_segment(datasets: &[SubjectDataset]) -> usize {
    datasets.iter().flat_map(|d| d.segments()).map(<[_]>::len).max().unwrap_or(0)
}

fn aggregate(
    model: ModelKind,
    w: usize,
    h: usize,
    outcomes: Vec<(SubjectId, Result<TrialResult>)>,
    longest: usize,
) -> std::result::Result<GridCell, EmptyCell> {
    let mut per_subject = Vec::new();
    let mut skipped = Vec::new();
    for (test, r) in outcomes {
        match r {
            Ok(t) => per_subject.push(SubjectScore {
                subject: test,
                test_rmse: t.test_rmse,
                val_rmse: t.val_rmse,
                subject_mean_rmse: t.subject_mean_rmse,
            }),
            Err(e) => skipped.push(SkippedFold {
                test,
                reason: e.to_string(),
            }),
        }
    }
    if per_subject.is_empty() {
        let reason = if longest < w + h {
            format!("no subject has {} contiguous days (longest run is {longest})", w + h)
        } else {
            skipped.first().map_or_else(|| "no folds".to_string(), |s| s.reason.clone())
        };
        return Err(EmptyCell {
            model,
            window: w,
            horizon: h,
            reason,
        });
    }
    let tests: Vec<f64> = per_subject.iter().map(|s| s.test_rmse).collect();
    let vals: Vec<f64> = per_subject.iter().filter_map(|s| s.val_rmse).collect();
    let base: Vec<f64> = per_subject.iter().map(|s| s.subject_mean_rmse).collect();
    Ok(GridCell {
        model,
        window: w,
        horizon: h,
        mean_test_rmse: mean(&tests),
        mean_val_rmse: (!vals.is_empty()).then(|| mean(&vals)),
        mean_subject_mean_rmse: mean(&base),
        per_subject,
        skipped,
    })
}

/// Every (model, W, H) cell over all LOSO folds, each fold with a fresh model.
///
/// Folds of all cells are scheduled together on the current rayon pool.
/// A fold that fails is listed under its cell; a cell without any completed
/// fold is reported in `empty`.
pub fn run_grid(datasets: &[SubjectDataset], spec: &GridSpec) -> Result<GridResult> {
    if spec.windows.is_empty() || spec.horizons.is_empty() || spec.models.is_empty() {
        return Err(Error::InvalidParameter("grid needs at least one window, horizon and model".into()));
    }
    spec.hyperparams.validate_structure()?;
    spec.train.validate()?;
    let datasets = sorted_datasets(datasets);
    let ids: Vec<SubjectId> = datasets.iter().map(|d| d.subject).collect();
    let domains = DomainIndex::new(&ids);
    let folds = loso_folds(&ids)?;
    let mut plans = Vec::new();
    for &model in &spec.models {
        for &w in &spec.windows {
            for &h in &spec.horizons {
                plans.push(FoldPlan {
                    model,
                    hyperparams: spec.hyperparams.clone(),
                    window: WindowConfig::new(w, h)?,
                    train: spec.train.clone(),
                    master_seed: spec.master_seed,
                    keep_series: false,
                });
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..plans.len()).flat_map(|p| (0..folds.len()).map(move |f| (p, f))).collect();
    let outcomes: Vec<Result<TrialResult>> = tasks
        .par_iter()
        .map(|&(p, f)| run_fold(&datasets, &domains, &folds[f], &plans[p]).map(|(r, _)| r))
        .collect();
    let longest = longest_segment(&datasets);
    let mut result = GridResult::default();
    let mut outcomes = outcomes.into_iter();
    for plan in &plans {
        let cell: Vec<(SubjectId, Result<TrialResult>)> = folds
            .iter()
            .map(|f| (f.test, outcomes.next().expect("one outcome per task")))
            .collect();
        match aggregate(plan.model, plan.window.window, plan.window.horizon, cell, longest) {
            Ok(c) => result.cells.push(c),
            Err(e) => result.empty.push(e),
        }
    }
    Ok(result)
}
