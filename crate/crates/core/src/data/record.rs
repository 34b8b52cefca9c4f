use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub u32);

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One day of device data. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub features: Vec<Option<f64>>,
    pub sleep_score: Option<f64>,
}

/// All records of one subject, ordered by date.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDataset {
    pub subject: SubjectId,
    pub feature_names: Vec<String>,
    pub records: Vec<DailyRecord>,
}

impl SubjectDataset {
    /// Validates strictly increasing dates and feature vector lengths.
    pub fn new(subject: SubjectId, feature_names: Vec<String>, records: Vec<DailyRecord>) -> Result<Self> {
        let ds = Self {
            subject,
            feature_names,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.feature_names.len();
        for (i, r) in self.records.iter().enumerate() {
            if r.features.len() != f {
                return Err(Error::Data {
                    subject: self.subject,
                    message: format!("record {} on {} has {} features, expected {f}", i, r.date, r.features.len()),
                });
            }
            if i > 0 && self.records[i - 1].date >= r.date {
                return Err(Error::Data {
                    subject: self.subject,
                    message: format!("dates not strictly increasing at {}", r.date),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Pairs of consecutive records more than one day apart.
    pub fn gaps(&self) -> Vec<(NaiveDate, NaiveDate)> {
        self.records
            .windows(2)
            .filter(|w| (w[1].date - w[0].date).num_days() > 1)
            .map(|w| (w[0].date, w[1].date))
            .collect()
    }

    /// Maximal runs of consecutive calendar days.
    pub fn segments(&self) -> Vec<&[DailyRecord]> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            let split = i == self.records.len() || (self.records[i].date - self.records[i - 1].date).num_days() != 1;
            if split {
                if i > start {
                    out.push(&self.records[start..i]);
                }
                start = i;
            }
        }
        out
    }

    /// Number of missing feature values and missing sleep scores.
    pub fn missing_count(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.features.iter().filter(|v| v.is_none()).count() + usize::from(r.sleep_score.is_none()))
            .sum()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.sleep_score).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(day: u32) -> DailyRecord {
        DailyRecord {
            date: NaiveDate::from_ymd_opt(2024, 1, day).unwrap(),
            features: vec![Some(1.0)],
            sleep_score: Some(70.0),
        }
    }

    #[test]
    fn segments_split_on_gaps() {
        let ds = SubjectDataset::new(SubjectId(1), vec!["a".into()], vec![rec(1), rec(2), rec(3), rec(5), rec(6), rec(9)]).unwrap();
        let lens: Vec<usize> = ds.segments().iter().map(|s| s.len()).collect();
        assert_eq!(lens, vec![3, 2, 1]);
        assert_eq!(ds.gaps().len(), 2);
    }

    #[test]
    fn rejects_unordered_dates() {
        assert!(SubjectDataset::new(SubjectId(1), vec!["a".into()], vec![rec(2), rec(1)]).is_err());
        assert!(SubjectDataset::new(SubjectId(1), vec!["a".into()], vec![rec(2), rec(2)]).is_err());
    }
}
