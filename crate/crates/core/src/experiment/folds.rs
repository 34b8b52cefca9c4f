use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::SubjectId;
use crate::error::{Error, Result};

/// One leave-one-subject-out split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub test: SubjectId,
    pub val: SubjectId,
    pub train: Vec<SubjectId>,
}

impl FoldSpec {
    pub fn check(&self) -> Result<()> {
        let train: BTreeSet<_> = self.train.iter().collect();
        if self.test == self.val || train.contains(&self.test) || train.contains(&self.val) || train.len() != self.train.len() {
            return Err(Error::Lineage(format!(
                "fold for test subject {} is not a disjoint split",
                self.test
            )));
        }
        Ok(())
    }
}

/// One fold per subject; validation is the next id after the test subject, wrapping around.
pub fn loso_folds(subjects: &[SubjectId]) -> Result<Vec<FoldSpec>> {
    let ids: Vec<SubjectId> = subjects.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if ids.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "leave-one-subject-out needs at least 3 subjects, got {}",
            ids.len()
        )));
    }
    Ok((0..ids.len())
        .map(|i| {
            let val = ids[(i + 1) % ids.len()];
            FoldSpec {
                test: ids[i],
                val,
                train: ids.iter().copied().filter(|&s| s != ids[i] && s != val).collect(),
            }
        })
        .collect())
}

/// Maps subject ids to domain-classifier labels: the position in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainIndex {
    ids: Vec<SubjectId>,
}

impl DomainIndex {
    pub fn new(subjects: &[SubjectId]) -> Self {
        Self {
            ids: subjects.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn subjects(&self) -> &[SubjectId] {
        &self.ids
    }

    pub fn label(&self, s: SubjectId) -> Result<usize> {
        self.ids
            .binary_search(&s)
            .map_err(|_| Error::InvalidParameter(format!("subject {s} has no domain label")))
    }

    pub fn labels(&self, subjects: &[SubjectId]) -> Result<Vec<usize>> {
        subjects.iter().map(|&s| self.label(s)).collect()
    }
}
