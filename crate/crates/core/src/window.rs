//! Sliding-window instances and mini-batches.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use sleepcast_kernel::{Rng, Tensor};

use crate::data::{DailyRecord, SubjectDataset, SubjectId};
use crate::error::{Error, Result};

pub const WINDOWS: [usize; 5] = [3, 5, 7, 9, 11];
pub const HORIZONS: [usize; 5] = [1, 3, 5, 7, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window: usize,
    pub horizon: usize,
    pub stride: usize,
}

impl WindowConfig {
    pub fn new(window: usize, horizon: usize) -> Result<Self> {
        Self::with_stride(window, horizon, 1)
    }

    pub fn with_stride(window: usize, horizon: usize, stride: usize) -> Result<Self> {
        if window == 0 || horizon == 0 || stride == 0 {
            return Err(Error::InvalidParameter(format!(
                "window ({window}), horizon ({horizon}) and stride ({stride}) must all be at least 1"
            )));
        }
        Ok(Self { window, horizon, stride })
    }

    /// Days covered by one instance.
    pub fn span(&self) -> usize {
        self.window + self.horizon
    }
}

/// Instances produced from a contiguous run of `n` days.
pub fn instance_count(n: usize, cfg: &WindowConfig) -> usize {
    if n < cfg.span() {
        0
    } else {
        (n - cfg.span()) / cfg.stride + 1
    }
}

/// One supervised example. `domain` doubles as the lineage tag.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedInstance {
    /// `[W, F]`
    pub x: Tensor,
    /// `[H]`
    pub y: Tensor,
    pub domain: SubjectId,
    /// First input day.
    pub start: NaiveDate,
    pub window: usize,
    pub horizon: usize,
}

impl WindowedInstance {
    pub fn input_days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.window).map(|i| self.start + Days::new(i as u64))
    }

    pub fn target_days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (self.window..self.window + self.horizon).map(|i| self.start + Days::new(i as u64))
    }
}

fn segment_instances(seg: &[DailyRecord], subject: SubjectId, f: usize, cfg: &WindowConfig) -> Result<Vec<WindowedInstance>> {
    let missing = |what: &str, d: NaiveDate| Error::Data {
        subject,
        message: format!("missing {what} on {d}; clean and impute before windowing"),
    };
    (0..instance_count(seg.len(), cfg))
        .map(|k| {
            let s = k * cfg.stride;
            let mut x = Vec::with_capacity(cfg.window * f);
            for r in &seg[s..s + cfg.window] {
                for v in &r.features {
                    x.push(v.ok_or_else(|| missing("feature", r.date))?);
                }
            }
            let y = seg[s + cfg.window..s + cfg.span()]
                .iter()
                .map(|r| r.sleep_score.ok_or_else(|| missing("sleep score", r.date)))
                .collect::<Result<Vec<_>>>()?;
            Ok(WindowedInstance {
                x: Tensor::new(&[cfg.window, f], x)?,
                y: Tensor::from_vec(y),
                domain: subject,
                start: seg[s].date,
                window: cfg.window,
                horizon: cfg.horizon,
            })
        })
        .collect()
}

/// Window every contiguous segment of `ds`, in start-day order.
pub fn slide(ds: &SubjectDataset, cfg: &WindowConfig) -> Result<Vec<WindowedInstance>> {
    let mut out = Vec::new();
    for seg in ds.segments() {
        out.extend(segment_instances(seg, ds.subject, ds.num_features(), cfg)?);
    }
    Ok(out)
}

pub fn slide_all<'a>(datasets: impl IntoIterator<Item = &'a SubjectDataset>, cfg: &WindowConfig) -> Result<Vec<WindowedInstance>> {
    let mut out = Vec::new();
    for ds in datasets {
        out.extend(slide(ds, cfg)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `[B, W, F]`
    pub x: Tensor,
    /// `[B, H]`
    pub y: Tensor,
    pub domains: Vec<SubjectId>,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.domains.len()
    }

    pub fn from_instances(items: &[&WindowedInstance]) -> Result<Self> {
        let first = items.first().ok_or(Error::NoInstances("batch"))?;
        let (w, f) = (first.x.shape()[0], first.x.shape()[1]);
        let h = first.y.len();
        let mut x = Vec::with_capacity(items.len() * w * f);
        let mut y = Vec::with_capacity(items.len() * h);
        for it in items {
            if it.x.shape() != first.x.shape() || it.y.len() != h {
                return Err(Error::InvalidParameter("instances in one batch differ in shape".into()));
            }
            x.extend_from_slice(it.x.data());
            y.extend_from_slice(it.y.data());
        }
        Ok(Self {
            x: Tensor::new(&[items.len(), w, f], x)?,
            y: Tensor::new(&[items.len(), h], y)?,
            domains: items.iter().map(|it| it.domain).collect(),
        })
    }
}

/// Split into batches of `batch_size`, keeping the final partial batch. Passing `rng` shuffles first.
pub fn batches(instances: &[WindowedInstance], batch_size: usize, rng: Option<&mut Rng>) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..instances.len()).collect();
    if let Some(rng) = rng {
        rng.shuffle(&mut order);
    }
    order
        .chunks(batch_size)
        .map(|c| Batch::from_instances(&c.iter().map(|&i| &instances[i]).collect::<Vec<_>>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize, skip: &[usize]) -> SubjectDataset {
        let start = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
        let records = (0..n)
            .filter(|i| !skip.contains(i))
            .map(|i| DailyRecord {
                date: start + Days::new(i as u64),
                features: vec![Some(i as f64), Some(-(i as f64))],
                sleep_score: Some(i as f64 / 100.0),
            })
            .collect();
        SubjectDataset::new(SubjectId(4), vec!["a".into(), "b".into()], records).unwrap()
    }

    #[test]
    fn counts() {
        let c = |n, w, h| slide(&series(n, &[]), &WindowConfig::new(w, h).unwrap()).unwrap().len();
        assert_eq!(c(10, 7, 1), 3);
        // a single window: days 0..=2 predict day 3
        assert_eq!(c(4, 3, 1), 1);
        assert_eq!(c(5, 3, 1), 2);
        assert_eq!(c(5, 5, 1), 0);
        let cfg = WindowConfig::with_stride(3, 2, 2).unwrap();
        assert_eq!(slide(&series(10, &[]), &cfg).unwrap().len(), instance_count(10, &cfg));
        assert_eq!(instance_count(10, &cfg), 3);
    }

    #[test]
    fn windows_by_hand() {
        let inst = slide(&series(5, &[]), &WindowConfig::new(3, 1).unwrap()).unwrap();
        assert_eq!(inst[0].x.data(), &[0.0, -0.0, 1.0, -1.0, 2.0, -2.0]);
        assert_eq!(inst[0].y.data(), &[0.03]);
        assert_eq!(inst[1].x.at2(0, 0), 1.0);
        assert_eq!(inst[1].y.data(), &[0.04]);
        assert!(inst.iter().all(|i| i.domain == SubjectId(4)));
    }

    #[test]
    fn gaps_split_segments() {
        // days 0..=4 and 6..=11
        let ds = series(12, &[5]);
        let cfg = WindowConfig::new(3, 1).unwrap();
        let inst = slide(&ds, &cfg).unwrap();
        assert_eq!(inst.len(), instance_count(5, &cfg) + instance_count(6, &cfg));
        for i in &inst {
            let days: Vec<NaiveDate> = i.input_days().chain(i.target_days()).collect();
            assert!(days.windows(2).all(|p| (p[1] - p[0]).num_days() == 1));
        }
    }

    #[test]
    fn batch_sizes_and_order() {
        let inst = slide(&series(14, &[]), &WindowConfig::new(3, 1).unwrap()).unwrap();
        assert_eq!(inst.len(), 11);
        let inst = &inst[..10];
        let b = batches(inst, 4, None).unwrap();
        assert_eq!(b.iter().map(Batch::size).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b[0].x.shape(), &[4, 3, 2]);
        assert_eq!(b[2].y.shape(), &[2, 1]);
        let ys: Vec<f64> = b.iter().flat_map(|b| b.y.data().to_vec()).collect();
        assert_eq!(ys, inst.iter().map(|i| i.y.data()[0]).collect::<Vec<_>>());

        let shuffled = |seed| {
            batches(inst, 4, Some(&mut Rng::new(seed)))
                .unwrap()
                .iter()
                .flat_map(|b| b.y.data().to_vec())
                .collect::<Vec<_>>()
        };
        assert_eq!(shuffled(3), shuffled(3));
        let mut s = shuffled(3);
        s.sort_by(f64::total_cmp);
        assert_eq!(s, ys);
        assert!(batches(&[], 4, None).unwrap().is_empty());
        assert!(batches(inst, 0, None).is_err());
    }
}
