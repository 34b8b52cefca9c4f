use log::warn;
use serde::{Deserialize, Serialize};

use super::record::{SubjectDataset, SubjectId};
use crate::error::{Error, Result};

/// Manually reported and rarely filled in by subjects.
pub const DEFAULT_DROP_FEATURES: [&str; 1] = ["hydration"];

/// Map the device sentinel `-1` to missing in features and scores.
pub fn mark_sentinels(ds: &mut SubjectDataset) {
    let sentinel = |v: &mut Option<f64>| {
        if *v == Some(-1.0) {
            *v = None;
        }
    };
    for r in &mut ds.records {
        r.features.iter_mut().for_each(sentinel);
        sentinel(&mut r.sleep_score);
    }
}

/// Drop the first and last recorded day, the named features, and days without a sleep score.
pub fn clean(ds: &SubjectDataset, drop_features: &[impl AsRef<str>]) -> Result<SubjectDataset> {
    if ds.len() < 3 {
        return Err(Error::TooShort {
            subject: ds.subject,
            len: ds.len(),
            min: 3,
        });
    }
    let keep: Vec<usize> = (0..ds.num_features())
        .filter(|&j| !drop_features.iter().any(|d| ds.feature_names[j].eq_ignore_ascii_case(d.as_ref())))
        .collect();
    let feature_names = keep.iter().map(|&j| ds.feature_names[j].clone()).collect();
    let records = ds.records[1..ds.len() - 1]
        .iter()
        .filter(|r| r.sleep_score.is_some())
        .map(|r| {
            let mut r = r.clone();
            r.features = keep.iter().map(|&j| r.features[j]).collect();
            r
        })
        .collect();
    SubjectDataset::new(ds.subject, feature_names, records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputeWarning {
    pub subject: SubjectId,
    pub feature: String,
}

/// Replace missing feature values by the subject's column mean; all-missing columns become 0.0.
pub fn impute_mean(datasets: &mut [SubjectDataset]) -> Vec<ImputeWarning> {
    let mut warnings = Vec::new();
    for ds in datasets.iter_mut() {
        for j in 0..ds.num_features() {
            let present: Vec<f64> = ds.records.iter().filter_map(|r| r.features[j]).collect();
            let fill = if present.is_empty() {
                if !ds.records.is_empty() {
                    warn!(
                        "subject {}: feature {} has no values, filling with 0",
                        ds.subject, ds.feature_names[j]
                    );
                    warnings.push(ImputeWarning {
                        subject: ds.subject,
                        feature: ds.feature_names[j].clone(),
                    });
                }
                0.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            };
            for r in &mut ds.records {
                r.features[j].get_or_insert(fill);
            }
        }
    }
    warnings
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub datasets: Vec<SubjectDataset>,
    pub warnings: Vec<ImputeWarning>,
}

/// Sentinel mapping, cleaning and imputation for raw device exports, sorted by subject.
pub fn preprocess(raw: &[SubjectDataset], drop_features: &[impl AsRef<str>]) -> Result<Preprocessed> {
    let mut datasets = raw
        .iter()
        .map(|d| {
            let mut d = d.clone();
            mark_sentinels(&mut d);
            clean(&d, drop_features)
        })
        .collect::<Result<Vec<_>>>()?;
    datasets.sort_by_key(|d| d.subject);
    if let Some(w) = datasets.windows(2).find(|w| w[0].feature_names != w[1].feature_names) {
        return Err(Error::Data {
            subject: w[1].subject,
            message: "feature registry differs between subjects".into(),
        });
    }
    let warnings = impute_mean(&mut datasets);
    Ok(Preprocessed { datasets, warnings })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::data::DailyRecord;

    fn ds(n: usize, names: &[&str]) -> SubjectDataset {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let records = (0..n)
            .map(|i| DailyRecord {
                date: start + chrono::Days::new(i as u64),
                features: (0..names.len()).map(|j| Some((i * 10 + j) as f64)).collect(),
                sleep_score: Some(70.0),
            })
            .collect();
        SubjectDataset::new(SubjectId(1), names.iter().map(|s| s.to_string()).collect(), records).unwrap()
    }

    #[test]
    fn trims_first_and_last_day() {
        let out = clean(&ds(30, &["a"]), &[] as &[&str]).unwrap();
        assert_eq!(out.len(), 28);
        assert_eq!(out.records[0].date, NaiveDate::from_ymd_opt(2024, 1, 2).unwrap());
        let out = clean(&ds(3, &["a"]), &[] as &[&str]).unwrap();
        assert_eq!(out.len(), 1);
        assert!(matches!(clean(&ds(2, &["a"]), &[] as &[&str]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn drops_named_feature() {
        let mut names: Vec<&str> = crate::data::FEATURE_NAMES.to_vec();
        names.insert(5, "Hydration");
        let raw = ds(5, &names);
        assert_eq!(raw.num_features(), 25);
        let out = clean(&raw, &DEFAULT_DROP_FEATURES).unwrap();
        assert_eq!(out.num_features(), 24);
        assert!(out.feature_index("hydration").is_none());
        assert!(out.records.iter().all(|r| r.features.len() == 24));
        // absent feature names are ignored
        let out = clean(&ds(5, &["a", "b"]), &DEFAULT_DROP_FEATURES).unwrap();
        assert_eq!(out.num_features(), 2);
    }

    #[test]
    fn missing_scores_are_removed() {
        let mut d = ds(6, &["a"]);
        d.records[2].sleep_score = None;
        let out = clean(&d, &[] as &[&str]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.gaps().len(), 1);
    }

    #[test]
    fn column_mean_imputation() {
        let mut d = ds(3, &["a", "b", "c"]);
        for (r, v) in d.records.iter_mut().zip([Some(1.0), None, Some(3.0)]) {
            r.features[0] = v;
            r.features[2] = None;
        }
        let before_b: Vec<_> = d.records.iter().map(|r| r.features[1]).collect();
        let mut all = vec![d];
        let warnings = impute_mean(&mut all);
        let col = |j: usize| all[0].records.iter().map(|r| r.features[j].unwrap()).collect::<Vec<_>>();
        assert_eq!(col(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(all[0].records.iter().map(|r| r.features[1]).collect::<Vec<_>>(), before_b);
        assert_eq!(col(2), vec![0.0, 0.0, 0.0]);
        assert_eq!(
            warnings,
            vec![ImputeWarning {
                subject: SubjectId(1),
                feature: "c".into()
            }]
        );
        assert_eq!(all[0].missing_count(), 0);
    }

    #[test]
    fn sentinel_mapping() {
        let mut d = ds(3, &["a"]);
        d.records[1].features[0] = Some(-1.0);
        d.records[2].sleep_score = Some(-1.0);
        mark_sentinels(&mut d);
        assert_eq!(d.records[1].features[0], None);
        assert_eq!(d.records[2].sleep_score, None);
    }
}
