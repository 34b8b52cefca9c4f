use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::GridResult;
use super::run::TrialResult;
use super::search::SearchResult;
use crate::error::{Error, Result};

pub const RESULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mean_test_rmse: f64,
    pub mean_val_rmse: Option<f64>,
    pub mean_subject_mean_rmse: f64,
    /// Folds where the model beats predicting the test subject's own mean.
    pub folds_beating_subject_mean: usize,
    pub folds: usize,
}

impl TrainSummary {
    pub fn from_trials(trials: &[TrialResult]) -> Option<Self> {
        if trials.is_empty() {
            return None;
        }
        let n = trials.len() as f64;
        let vals: Vec<f64> = trials.iter().filter_map(|t| t.val_rmse).collect();
        Some(Self {
            mean_test_rmse: trials.iter().map(|t| t.test_rmse).sum::<f64>() / n,
            mean_val_rmse: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
            mean_subject_mean_rmse: trials.iter().map(|t| t.subject_mean_rmse).sum::<f64>() / n,
            folds_beating_subject_mean: trials.iter().filter(|t| t.test_rmse < t.subject_mean_rmse).count(),
            folds: trials.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResults {
    pub version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchResult>,
    pub trials: Vec<TrialResult>,
    pub summary: Option<TrainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResults {
    pub version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub grid: GridResult,
}

/// Contents of a results JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum ResultsFile {
    Train(TrainResults),
    Grid(GridResults),
}

impl ResultsFile {
    pub fn seed(&self) -> u64 {
        match self {
            ResultsFile::Train(t) => t.seed,
            ResultsFile::Grid(g) => g.seed,
        }
    }

    pub fn config(&self) -> &serde_json::Value {
        match self {
            ResultsFile::Train(t) => &t.config,
            ResultsFile::Grid(g) => &g.config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: Self = serde_json::from_str(&text).map_err(|e| Error::Results {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let version = match &parsed {
            ResultsFile::Train(t) => t.version,
            ResultsFile::Grid(g) => g.version,
        };
        if version != RESULTS_VERSION {
            return Err(Error::Results {
                path: path.to_path_buf(),
                message: format!("unsupported results version {version}"),
            });
        }
        Ok(parsed)
    }
}

/// Wall-clock durations, written next to the results so those stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub entries: Vec<TimingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub label: String,
    pub seconds: f64,
}

impl Timings {
    pub fn push(&mut self, label: impl Into<String>, d: std::time::Duration) {
        self.entries.push(TimingEntry {
            label: label.into(),
            seconds: d.as_secs_f64(),
        });
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}
