//! Run configuration: one TOML file, then command-line overrides.
//!
//! ```toml
//! seed = 7
//! jobs = 1
//! out = "runs/demo"
//! input = "runs/demo/synthetic.csv"
//! drop_features = ["hydration"]
//!
//! [generate]
//! n_subjects = 16
//! n_days = 120
//! shift_strength = 0.5
//!
//! [train]
//! model = "adast"
//! window = 7
//! horizon = 1
//! epochs = 50
//!
//! [hyperparams]
//! alpha = 0.1
//! lstm_hidden_size = 64
//!
//! [search]
//! n_trials = 0
//!
//! [grid]
//! windows = [3, 5, 7, 9, 11]
//! horizons = [1, 3, 5, 7, 9]
//! models = ["adast"]
//! ```
//!
//! Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SyntheticConfig, DEFAULT_DROP_FEATURES};
use crate::error::{Error, Result};
use crate::experiment::{GridSpec, TrainConfig};
use crate::model::{HyperParams, ModelKind};
use crate::window::{HORIZONS, WINDOWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub model: ModelKind,
    pub window: usize,
    pub horizon: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Include the domain-classification term for models that have a domain head.
    pub domain_loss: bool,
    /// Write one checkpoint per fold.
    pub checkpoints: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            model: ModelKind::AdaSt,
            window: 7,
            horizon: 1,
            epochs: t.epochs,
            patience: t.patience,
            lr: t.lr,
            weight_decay: t.weight_decay,
            domain_loss: t.domain_loss,
            checkpoints: true,
        }
    }
}

impl TrainSection {
    /// Trainer settings; alpha, batch size and seed are filled in per fold.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            patience: self.patience,
            lr: self.lr,
            weight_decay: self.weight_decay,
            domain_loss: self.domain_loss,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    /// 0 disables the search and trains `[hyperparams]` directly.
    pub n_trials: usize,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub windows: Vec<usize>,
    pub horizons: Vec<usize>,
    pub models: Vec<ModelKind>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            windows: WINDOWS.to_vec(),
            horizons: HORIZONS.to_vec(),
            models: vec![ModelKind::AdaSt],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    /// Input CSV for `train` and `grid`.
    pub input: Option<PathBuf>,
    pub drop_features: Vec<String>,
    pub generate: SyntheticConfig,
    pub train: TrainSection,
    pub hyperparams: HyperParams,
    pub search: SearchSection,
    pub grid: GridSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            out: PathBuf::from("out"),
            input: None,
            drop_features: DEFAULT_DROP_FEATURES.iter().map(|s| s.to_string()).collect(),
            generate: SyntheticConfig::default(),
            train: TrainSection::default(),
            hyperparams: HyperParams::default(),
            search: SearchSection::default(),
            grid: GridSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.hyperparams.validate_structure()?;
        self.train.train_config().validate()
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            windows: self.grid.windows.clone(),
            horizons: self.grid.horizons.clone(),
            models: self.grid.models.clone(),
            hyperparams: self.hyperparams.clone(),
            train: self.train.train_config(),
            master_seed: self.seed,
        }
    }
}
