//! Seeded synthetic cohort.
//!
//! Each subject has its own generating parameters, drawn as
//! `reference + shift_strength * spread * u` with `u ~ U(-1, 1)`. The daily
//! sleep score is
//!
//! ```text
//! s_t = level + amp * sin(2π (dow_t + phase) / 7)
//!       + β_steps * (steps_{t-1} - 8000) / 2400
//!       + β_stress * (stress_{t-1} - 35) / 8
//!       + a_t + e_t
//! ```
//!
//! where `a_t` is an AR(1) latent (φ = 0.6) and `e_t` Gaussian noise. With
//! probability `anomaly_rate` a day loses 20 to 40 points. Sleep-stage
//! features are noisy functions of the same day's score, activity features of
//! the day's steps, and heart-rate features of a subject-level resting rate.
//! Feature cells are blanked or set to the `-1` device sentinel at
//! `missing_rate`. This data is artificial and only exercises the pipeline.

use std::f64::consts::PI;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};
use sleepcast_kernel::Rng;

use super::record::{DailyRecord, SubjectDataset, SubjectId};
use super::{default_feature_names, working_day_flag, FEATURE_NAMES};
use crate::error::{Error, Result};

pub const MIN_DAYS: usize = 20;

const STEPS_REF: f64 = 8000.0;
const STEPS_SCALE: f64 = 2400.0;
const STRESS_REF: f64 = 35.0;
const STRESS_SCALE: f64 = 8.0;
const AR_PHI: f64 = 0.6;
const AR_STD: f64 = 2.0;
const NOISE_STD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub n_days: usize,
    /// 0 gives every subject identical generating parameters.
    pub shift_strength: f64,
    pub anomaly_rate: f64,
    pub missing_rate: f64,
    pub start_date: NaiveDate,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_subjects: 16,
            n_days: 120,
            shift_strength: 0.5,
            anomaly_rate: 0.02,
            missing_rate: 0.05,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_subjects == 0 {
            return bad("n_subjects must be at least 1".into());
        }
        if self.n_days < MIN_DAYS {
            return bad(format!("n_days = {} is below the minimum of {MIN_DAYS}", self.n_days));
        }
        for (name, v) in [("anomaly_rate", self.anomaly_rate), ("missing_rate", self.missing_rate)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} = {v} must lie in [0, 1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.shift_strength) {
            return bad(format!("shift_strength = {} must lie in [0, 1]", self.shift_strength));
        }
        Ok(())
    }
}

/// Generating parameters of one subject.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectParams {
    pub level: f64,
    pub weekly_amp: f64,
    pub weekly_phase: f64,
    pub beta_steps: f64,
    pub beta_stress: f64,
    pub steps_mean: f64,
    pub stress_mean: f64,
    pub resting_hr: f64,
    pub respiration: f64,
}

impl SubjectParams {
    pub fn draw(shift: f64, rng: &mut Rng) -> Self {
        let mut p = |reference: f64, spread: f64| reference + shift * spread * rng.uniform_range(-1.0, 1.0);
        Self {
            level: p(70.0, 15.0),
            weekly_amp: p(4.0, 2.0),
            weekly_phase: p(0.0, 3.5),
            beta_steps: p(5.0, 2.5),
            beta_stress: p(-5.0, 2.5),
            steps_mean: p(STEPS_REF, STEPS_SCALE),
            stress_mean: p(STRESS_REF, 10.0),
            resting_hr: p(60.0, 8.0),
            respiration: p(15.0, 2.0),
        }
    }
}

pub fn subject_params(cfg: &SyntheticConfig, seed: u64, subject: SubjectId) -> SubjectParams {
    SubjectParams::draw(cfg.shift_strength, &mut Rng::derive(seed, &[u64::from(subject.0), 0]))
}

/// Subjects are numbered `1..=n_subjects`. The output is raw: sentinels are still `Some(-1.0)`.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<Vec<SubjectDataset>> {
    cfg.validate()?;
    (1..=cfg.n_subjects as u32)
        .map(|id| {
            let subject = SubjectId(id);
            let params = subject_params(cfg, seed, subject);
            let mut rng = Rng::derive(seed, &[u64::from(id), 1]);
            generate_subject(cfg, subject, &params, &mut rng)
        })
        .collect()
}

fn generate_subject(cfg: &SyntheticConfig, subject: SubjectId, p: &SubjectParams, rng: &mut Rng) -> Result<SubjectDataset> {
    let n = cfg.n_days;
    // index 0 is the day before the first record
    let steps: Vec<f64> = (0..=n).map(|_| (p.steps_mean + STEPS_SCALE * rng.normal()).max(0.0)).collect();
    let stress: Vec<f64> = (0..=n)
        .map(|_| (p.stress_mean + STRESS_SCALE * rng.normal()).clamp(0.0, 100.0))
        .collect();
    let mut ar = 0.0;
    let mut records = Vec::with_capacity(n);
    for t in 0..n {
        let date = cfg.start_date + Days::new(t as u64);
        let dow = f64::from(date.weekday().num_days_from_monday());
        ar = AR_PHI * ar + AR_STD * rng.normal();
        let mut s = p.level
            + p.weekly_amp * (2.0 * PI * (dow + p.weekly_phase) / 7.0).sin()
            + p.beta_steps * (steps[t] - STEPS_REF) / STEPS_SCALE
            + p.beta_stress * (stress[t] - STRESS_REF) / STRESS_SCALE
            + ar
            + NOISE_STD * rng.normal();
        if rng.bernoulli(cfg.anomaly_rate) {
            s -= rng.uniform_range(20.0, 40.0);
        }
        let score = s.clamp(0.0, 100.0).round();
        let mut features = daily_features(p, steps[t + 1], stress[t + 1], score, date, rng);
        for (j, v) in features.iter_mut().enumerate() {
            if FEATURE_NAMES[j] == super::WORKING_DAY_FEATURE {
                continue;
            }
            if rng.bernoulli(cfg.missing_rate) {
                *v = if rng.bernoulli(0.5) { None } else { Some(-1.0) };
            }
        }
        records.push(DailyRecord {
            date,
            features,
            sleep_score: Some(score),
        });
    }
    SubjectDataset::new(subject, default_feature_names(), records)
}

fn daily_features(p: &SubjectParams, steps: f64, stress: f64, score: f64, date: NaiveDate, rng: &mut Rng) -> Vec<Option<f64>> {
    let mut nz = |sd: f64| sd * rng.normal();
    let ds = steps - STEPS_REF;
    let q = score - 70.0;
    let rhr = p.resting_hr + 0.05 * (stress - STRESS_REF) + nz(1.5);
    let resp = p.respiration + nz(0.8);
    let resp_sleep = p.respiration - 1.0 - 0.03 * q + nz(0.5);
    let v = [
        1800.0 + 0.05 * steps + nz(100.0),
        steps.round(),
        (0.75 * steps + nz(200.0)).max(0.0),
        (600.0 + 0.1 * ds + nz(200.0)).max(0.0),
        (3600.0 + 0.4 * ds + nz(600.0)).max(0.0),
        (20.0 + 0.004 * ds + nz(8.0)).max(0.0).round(),
        rhr.round(),
        (rhr - 5.0 + nz(1.5)).round(),
        (rhr + 60.0 + 0.003 * ds + nz(8.0)).round(),
        resp,
        resp + 6.0 + nz(1.0),
        resp - 5.0 + nz(1.0),
        stress.round(),
        (4800.0 + 60.0 * q + nz(400.0)).max(0.0).round(),
        (14400.0 + 40.0 * q + nz(900.0)).max(0.0).round(),
        (5400.0 + 50.0 * q + nz(500.0)).max(0.0).round(),
        (1800.0 - 40.0 * q + nz(300.0)).max(0.0).round(),
        (3.0 - 0.08 * q + nz(1.0)).max(0.0).round(),
        (20.0 - 0.4 * q + 0.2 * (stress - STRESS_REF) + nz(3.0)).max(0.0).round(),
        (40.0 - 0.8 * q + nz(6.0)).max(0.0).round(),
        resp_sleep - 3.0 + nz(0.5),
        resp_sleep + 4.0 + nz(0.5),
        resp_sleep,
        working_day_flag(date),
    ];
    v.into_iter().map(Some).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(shift: f64) -> SyntheticConfig {
        SyntheticConfig {
            shift_strength: shift,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_synthetic(&cfg(0.5), 11).unwrap();
        let b = generate_synthetic(&cfg(0.5), 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&cfg(0.5), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shape_and_schema() {
        let data = generate_synthetic(&cfg(0.5), 1).unwrap();
        assert_eq!(data.len(), 16);
        for (i, d) in data.iter().enumerate() {
            assert_eq!(d.subject, SubjectId(i as u32 + 1));
            assert_eq!(d.len(), 120);
            assert_eq!(d.num_features(), 24);
            for r in &d.records {
                let s = r.sleep_score.unwrap();
                assert!((0.0..=100.0).contains(&s));
                assert_eq!(r.features[23], Some(working_day_flag(r.date)));
            }
        }
        let missing: usize = data.iter().map(|d| d.missing_count()).sum();
        let sentinels: usize = data
            .iter()
            .flat_map(|d| &d.records)
            .flat_map(|r| &r.features)
            .filter(|v| **v == Some(-1.0))
            .count();
        let cells = 16 * 120 * 23;
        let rate = (missing + sentinels) as f64 / cells as f64;
        assert!((0.04..0.06).contains(&rate), "{rate}");
        assert!(missing > 0 && sentinels > 0);
    }

    #[test]
    fn zero_shift_shares_parameters() {
        let c = cfg(0.0);
        let first = subject_params(&c, 3, SubjectId(1));
        for id in 2..=16 {
            assert_eq!(subject_params(&c, 3, SubjectId(id)), first);
        }
        assert_ne!(
            subject_params(&cfg(1.0), 3, SubjectId(1)),
            subject_params(&cfg(1.0), 3, SubjectId(2))
        );
    }

    #[test]
    fn full_shift_separates_subjects() {
        let data = generate_synthetic(&cfg(1.0), 5).unwrap();
        let stats: Vec<(f64, f64)> = data
            .iter()
            .map(|d| {
                let s = d.scores();
                let m = s.iter().sum::<f64>() / s.len() as f64;
                let v = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
                (m, v.sqrt())
            })
            .collect();
        let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let spread = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
        let within = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
        assert!(spread >= 2.0 * within, "spread {spread}, within {within}");
    }

    #[test]
    fn rejects_bad_config() {
        let short = SyntheticConfig { n_days: 5, ..cfg(0.5) };
        assert!(matches!(generate_synthetic(&short, 0), Err(Error::InvalidParameter(_))));
        for rate in [1.0, -0.1] {
            let c = SyntheticConfig {
                missing_rate: rate,
                ..cfg(0.5)
            };
            assert!(c.validate().is_err());
            let c = SyntheticConfig {
                anomaly_rate: rate,
                ..cfg(0.5)
            };
            assert!(c.validate().is_err());
        }
    }
}
