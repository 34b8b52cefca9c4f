use serde::{Deserialize, Serialize};

use super::record::{SubjectDataset, SubjectId};
use crate::error::{Error, Result};

/// Sleep scores live in `[0, 100]`.
pub const TARGET_SCALE: f64 = 100.0;
const MIN_STD: f64 = 1e-8;

/// Feature z-scoring fitted on training subjects plus fixed score scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub target_scale: f64,
    /// Subjects whose records were used for fitting.
    pub fitted_on: Vec<SubjectId>,
}

fn missing(subject: SubjectId) -> Error {
    Error::Data {
        subject,
        message: "missing values remain; impute before normalizing".into(),
    }
}

impl Normalizer {
    /// Population mean and standard deviation per feature over every record of `train`.
    pub fn fit(train: &[&SubjectDataset]) -> Result<Self> {
        let first = train.first().ok_or(Error::EmptyTrainingSet)?;
        let f = first.num_features();
        let n: usize = train.iter().map(|d| d.len()).sum();
        if n == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        let mut sum = vec![0.0; f];
        for d in train {
            if d.feature_names != first.feature_names {
                return Err(Error::Data {
                    subject: d.subject,
                    message: "feature registry differs between training subjects".into(),
                });
            }
            for r in &d.records {
                for (s, v) in sum.iter_mut().zip(&r.features) {
                    *s += v.ok_or_else(|| missing(d.subject))?;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut ss = vec![0.0; f];
        for d in train {
            for r in &d.records {
                for ((s, v), m) in ss.iter_mut().zip(&r.features).zip(&mean) {
                    *s += (v.expect("checked above") - m).powi(2);
                }
            }
        }
        let std = ss.iter().map(|s| (s / n as f64).sqrt().max(MIN_STD)).collect();
        let mut fitted_on: Vec<SubjectId> = train.iter().map(|d| d.subject).collect();
        fitted_on.sort();
        Ok(Self {
            feature_names: first.feature_names.clone(),
            mean,
            std,
            target_scale: TARGET_SCALE,
            fitted_on,
        })
    }

    pub fn normalize_score(&self, s: f64) -> f64 {
        s / self.target_scale
    }

    pub fn denormalize_score(&self, s: f64) -> f64 {
        s * self.target_scale
    }

    fn check(&self, ds: &SubjectDataset) -> Result<()> {
        if ds.feature_names != self.feature_names {
            return Err(Error::Data {
                subject: ds.subject,
                message: "feature registry does not match the normalizer".into(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, ds: &SubjectDataset) -> Result<SubjectDataset> {
        self.check(ds)?;
        let mut out = ds.clone();
        for r in &mut out.records {
            for ((v, m), s) in r.features.iter_mut().zip(&self.mean).zip(&self.std) {
                let x = v.ok_or_else(|| missing(ds.subject))?;
                *v = Some((x - m) / s);
            }
            r.sleep_score = r.sleep_score.map(|y| self.normalize_score(y));
        }
        Ok(out)
    }

    pub fn invert(&self, ds: &SubjectDataset) -> Result<SubjectDataset> {
        self.check(ds)?;
        let mut out = ds.clone();
        for r in &mut out.records {
            for ((v, m), s) in r.features.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = v.map(|z| z * s + m);
            }
            r.sleep_score = r.sleep_score.map(|y| self.denormalize_score(y));
        }
        Ok(out)
    }
}
