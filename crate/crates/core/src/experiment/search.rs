use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sleepcast_kernel::Rng;

use super::run::TrialResult;
use crate::error::{Error, Result};
use crate::model::{HyperParams, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrial {
    pub index: usize,
    pub hyperparams: HyperParams,
    /// Mean validation RMSE over folds; the selection score.
    pub mean_val_rmse: Option<f64>,
    pub mean_test_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Option<usize>,
    pub trials: Vec<SearchTrial>,
}

impl SearchResult {
    pub fn best_hyperparams(&self) -> Option<&HyperParams> {
        self.best.map(|i| &self.trials[i].hyperparams)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Seeded random search over `space`.
///
/// All `n_trials` points are drawn before the first trial runs, so the draw
/// sequence does not depend on trial outcomes. `run_trial` evaluates one point
/// over every fold. Failed trials are recorded and skipped; once `timeout`
/// has elapsed the remaining trials are recorded as not run.
pub fn random_search<F>(
    space: &SearchSpace,
    n_trials: usize,
    rng: &mut Rng,
    timeout: Option<Duration>,
    mut run_trial: F,
) -> Result<SearchResult>
where
    F: FnMut(usize, &HyperParams) -> Result<Vec<TrialResult>>,
{
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be at least 1".into()));
    }
    let draws = (0..n_trials).map(|_| space.sample(rng)).collect::<Result<Vec<_>>>()?;
    let started = Instant::now();
    let mut trials = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, f64)> = None;
    for (index, hp) in draws.into_iter().enumerate() {
        let mut trial = SearchTrial {
            index,
            hyperparams: hp,
            mean_val_rmse: None,
            mean_test_rmse: None,
            error: None,
        };
        if timeout.is_some_and(|t| started.elapsed() >= t) {
            trial.error = Some("not run: search timeout reached".into());
            trials.push(trial);
            continue;
        }
        match run_trial(index, &trial.hyperparams) {
            Ok(results) => {
                trial.mean_val_rmse = mean(results.iter().filter_map(|r| r.val_rmse));
                trial.mean_test_rmse = mean(results.iter().map(|r| r.test_rmse));
                if let Some(score) = trial.mean_val_rmse {
                    if !matches!(best, Some((_, b)) if score >= b) {
                        best = Some((index, score));
                    }
                }
            }
            Err(e) => {
                log::warn!("search trial {index} failed: {e}");
                trial.error = Some(e.to_string());
            }
        }
        trials.push(trial);
    }
    Ok(SearchResult {
        best: best.map(|(i, _)| i),
        trials,
    })
}
