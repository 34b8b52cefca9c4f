//! Text summaries, CSV exports and SVG charts of results files.

pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::data::{SubjectId, TARGET_SCALE};
use crate::error::{Error, Result};
use crate::experiment::{GridResult, ResultsFile, SeriesPoint};
use crate::model::ModelKind;
use svg::{line_chart, radar_chart, LineSeries, RadarSeries};

/// Reference RMSE values reported on a private real-world cohort, kept for comparison only.
pub mod reference {
    /// Best mean RMSE, at W = 7 and H = 1.
    pub const BEST_RMSE: f64 = 0.282;
    pub const BEST_WINDOW: usize = 7;
    pub const BEST_HORIZON: usize = 1;
    /// Range of the best baseline RMSE values.
    pub const BASELINE_RMSE_MIN: f64 = 0.3047;
    pub const BASELINE_RMSE_MAX: f64 = 0.4244;
    /// Mean RMSE at H = 9.
    pub const H9_RMSE: f64 = 0.303;
}

/// Header lines stating the reference numbers and that they are not reproduced here.
pub fn reference_header() -> String {
    use reference::*;
    format!(
        "Reference values from a private real-world cohort (not released; not reproducible on synthetic data):\n\
         \x20 best RMSE {BEST_RMSE} at W={BEST_WINDOW}/H={BEST_HORIZON}; baselines {BASELINE_RMSE_MIN} to {BASELINE_RMSE_MAX}; {H9_RMSE} at H=9\n"
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestCell {
    pub model: ModelKind,
    pub window: usize,
    pub horizon: usize,
    pub mean_test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectRow {
    pub subject: SubjectId,
    pub test_rmse: f64,
    pub val_rmse: Option<f64>,
    pub subject_mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub best: Option<BestCell>,
    /// Per-subject scores of the best cell.
    pub subjects: Vec<SubjectRow>,
    /// True and predicted values per test subject.
    pub test_series: BTreeMap<SubjectId, Vec<SeriesPoint>>,
    /// True and predicted values of each fold's validation subject.
    pub val_series: BTreeMap<SubjectId, Vec<SeriesPoint>>,
    pub text: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

/// Summarize one or more results files. The best cell is the lowest mean test RMSE across all of them.
pub fn build_report(files: &[ResultsFile]) -> Result<Report> {
    let mut best: Option<(BestCell, Vec<SubjectRow>)> = None;
    let mut test_series = BTreeMap::new();
    let mut val_series = BTreeMap::new();
    let mut consider = |cell: BestCell, rows: Vec<SubjectRow>| {
        if !matches!(&best, Some((b, _)) if cell.mean_test_rmse >= b.mean_test_rmse) {
            best = Some((cell, rows));
        }
    };
    for f in files {
        match f {
            ResultsFile::Train(t) => {
                if let (Some(s), Some(first)) = (&t.summary, t.trials.first()) {
                    let rows = t
                        .trials
                        .iter()
                        .map(|r| SubjectRow {
                            subject: r.fold.test,
                            test_rmse: r.test_rmse,
                            val_rmse: r.val_rmse,
                            subject_mean_rmse: r.subject_mean_rmse,
                        })
                        .collect();
                    let cell = BestCell {
                        model: first.model,
                        window: first.window,
                        horizon: first.horizon,
                        mean_test_rmse: s.mean_test_rmse,
                    };
                    consider(cell, rows);
                }
                for r in &t.trials {
                    test_series.insert(r.fold.test, r.test_series.clone());
                    val_series.entry(r.fold.val).or_insert_with(|| r.val_series.clone());
                }
            }
            ResultsFile::Grid(g) => {
                for c in &g.grid.cells {
                    let rows = c
                        .per_subject
                        .iter()
                        .map(|s| SubjectRow {
                            subject: s.subject,
                            test_rmse: s.test_rmse,
                            val_rmse: s.val_rmse,
                            subject_mean_rmse: s.subject_mean_rmse,
                        })
                        .collect();
                    let cell = BestCell {
                        model: c.model,
                        window: c.window,
                        horizon: c.horizon,
                        mean_test_rmse: c.mean_test_rmse,
                    };
                    consider(cell, rows);
                }
            }
        }
    }
    let (best, subjects) = match best {
        Some((b, rows)) => (Some(b), rows),
        None => (None, Vec::new()),
    };

    let mut text = reference_header();
    text.push('\n');
    match &best {
        Some(b) => {
            let _ = writeln!(
                text,
                "Best cell: {} W={} H={} mean test RMSE {:.4}",
                b.model, b.window, b.horizon, b.mean_test_rmse
            );
        }
        None => text.push_str("No completed cells.\n"),
    }
    if !subjects.is_empty() {
        let _ = writeln!(
            text,
            "\n{:>8}  {:>10}  {:>10}  {:>13}",
            "subject", "test RMSE", "val RMSE", "subject mean"
        );
        for r in &subjects {
            let _ = writeln!(
                text,
                "{:>8}  {:>10.4}  {:>10}  {:>13.4}",
                r.subject.to_string(),
                r.test_rmse,
                fmt_opt(r.val_rmse),
                r.subject_mean_rmse
            );
        }
        let beat = subjects.iter().filter(|r| r.test_rmse < r.subject_mean_rmse).count();
        let _ = writeln!(text, "\nBeats the subject-mean predictor on {beat} of {} subjects.", subjects.len());
    }
    for f in files {
        if let ResultsFile::Grid(g) = f {
            for e in &g.grid.empty {
                let _ = writeln!(text, "Empty cell {} W={} H={}: {}", e.model, e.window, e.horizon, e.reason);
            }
        }
    }
    Ok(Report {
        best,
        subjects,
        test_series,
        val_series,
        text,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv export: {e}"))
}

/// `subject,date,day,truth,predicted,truth_score,predicted_score`, one row per predicted day.
pub fn write_series_csv<W: Write>(w: W, points: &[SeriesPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["subject", "date", "day", "truth", "predicted", "truth_score", "predicted_score"])
        .map_err(csv_err)?;
    for p in points {
        for (d, (t, y)) in p.truth.iter().zip(&p.predicted).enumerate() {
            let date = p.date + chrono::Days::new(d as u64);
            out.write_record([
                p.subject.to_string(),
                date.to_string(),
                (d + 1).to_string(),
                t.to_string(),
                y.to_string(),
                (t * TARGET_SCALE).to_string(),
                (y * TARGET_SCALE).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush().map_err(|e| Error::InvalidParameter(format!("csv export: {e}")))
}

/// Flat `(model, W, H)` table; empty cells have blank scores and a reason.
pub fn write_grid_csv<W: Write>(w: W, grid: &GridResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model",
        "window",
        "horizon",
        "mean_test_rmse",
        "mean_val_rmse",
        "mean_subject_mean_rmse",
        "folds",
        "note",
    ])
    .map_err(csv_err)?;
    for c in &grid.cells {
        out.write_record([
            c.model.to_string(),
            c.window.to_string(),
            c.horizon.to_string(),
            c.mean_test_rmse.to_string(),
            c.mean_val_rmse.map_or(String::new(), |v| v.to_string()),
            c.mean_subject_mean_rmse.to_string(),
            c.per_subject.len().to_string(),
            if c.skipped.is_empty() {
                String::new()
            } else {
                format!("{} folds skipped", c.skipped.len())
            },
        ])
        .map_err(csv_err)?;
    }
    for e in &grid.empty {
        out.write_record([
            e.model.to_string(),
            e.window.to_string(),
            e.horizon.to_string(),
            String::new(),
            String::new(),
            String::new(),
            "0".into(),
            e.reason.clone(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::InvalidParameter(format!("csv export: {e}")))
}

/// Per-subject test RMSE of every model at the best cell's (W, H) of `focus`.
pub struct RadarData {
    pub window: usize,
    pub horizon: usize,
    pub subjects: Vec<SubjectId>,
    pub models: Vec<ModelKind>,
    /// `rmse[model][subject]`; NaN where a fold did not complete.
    pub rmse: Vec<Vec<f64>>,
}

pub fn radar_data(grid: &GridResult, focus: ModelKind) -> Option<RadarData> {
    let best = grid.best(focus).or_else(|| grid.cells.first())?;
    let (window, horizon) = (best.window, best.horizon);
    let models = grid.models();
    let mut subjects: Vec<SubjectId> = grid
        .cells
        .iter()
        .filter(|c| c.window == window && c.horizon == horizon)
        .flat_map(|c| c.per_subject.iter().map(|s| s.subject))
        .collect();
    subjects.sort();
    subjects.dedup();
    let rmse = models
        .iter()
        .map(|&m| {
            subjects
                .iter()
                .map(|s| {
                    grid.cell(m, window, horizon)
                        .and_then(|c| c.per_subject.iter().find(|p| p.subject == *s))
                        .map_or(f64::NAN, |p| p.test_rmse)
                })
                .collect()
        })
        .collect();
    Some(RadarData {
        window,
        horizon,
        subjects,
        models,
        rmse,
    })
}

pub fn write_radar_csv<W: Write>(w: W, data: &RadarData) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["subject".to_string()];
    header.extend(data.models.iter().map(|m| m.to_string()));
    out.write_record(&header).map_err(csv_err)?;
    for (j, s) in data.subjects.iter().enumerate() {
        let mut row = vec![s.to_string()];
        row.extend(
            data.rmse
                .iter()
                .map(|r| if r[j].is_nan() { String::new() } else { r[j].to_string() }),
        );
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::InvalidParameter(format!("csv export: {e}")))
}

pub fn radar_svg(data: &RadarData) -> String {
    let axes: Vec<String> = data.subjects.iter().map(|s| format!("S{s}")).collect();
    let series: Vec<RadarSeries> = data
        .models
        .iter()
        .zip(&data.rmse)
        .map(|(m, v)| RadarSeries {
            label: m.to_string(),
            values: v.clone(),
        })
        .collect();
    radar_chart(
        &format!("Per-subject test RMSE, W={} H={}", data.window, data.horizon),
        &axes,
        &series,
    )
}

/// One chart per model: mean test RMSE against horizon, one line per window.
pub fn line_svgs(grid: &GridResult) -> Vec<(ModelKind, String)> {
    grid.models()
        .into_iter()
        .map(|m| {
            let mut by_window: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
            for c in grid.cells.iter().filter(|c| c.model == m) {
                by_window.entry(c.window).or_default().push((c.horizon as f64, c.mean_test_rmse));
            }
            let series: Vec<LineSeries> = by_window
                .into_iter()
                .map(|(w, mut pts)| {
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    LineSeries {
                        label: format!("W={w}"),
                        points: pts,
                    }
                })
                .collect();
            (
                m,
                line_chart(&format!("{m}: mean test RMSE"), "horizon H (days)", "RMSE (normalized)", &series),
            )
        })
        .collect()
}
