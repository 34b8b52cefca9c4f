//! Build a report from freshly computed train results and print the per-day series of one subject.

use sleepcast::data::{generate_synthetic, preprocess, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::experiment::{run_loso, FoldPlan, ResultsFile, TrainConfig, TrainResults, TrainSummary, RESULTS_VERSION};
use sleepcast::model::{HyperParams, ModelKind};
use sleepcast::report::{build_report, write_series_csv};
use sleepcast::window::WindowConfig;

fn main() -> sleepcast::Result<()> {
    let cfg = SyntheticConfig {
        n_subjects: 3,
        n_days: 40,
        ..Default::default()
    };
    let data = preprocess(&generate_synthetic(&cfg, 4)?, &DEFAULT_DROP_FEATURES)?.datasets;
    let plan = FoldPlan {
        model: ModelKind::AdaSt,
        hyperparams: HyperParams::default(),
        window: WindowConfig::new(7, 2)?,
        train: TrainConfig {
            epochs: 5,
            ..Default::default()
        },
        master_seed: 4,
        keep_series: true,
    };
    let trials: Vec<_> = run_loso(&data, &plan)?.into_iter().map(|(t, _)| t).collect();
    let results = ResultsFile::Train(TrainResults {
        version: RESULTS_VERSION,
        seed: 4,
        config: serde_json::to_value(&plan)?,
        search: None,
        summary: TrainSummary::from_trials(&trials),
        trials,
    });

    let report = build_report(&[results])?;
    print!("{}", report.text);
    if let Some((subject, points)) = report.test_series.iter().next() {
        println!("\ntest series, subject {subject}:");
        write_series_csv(std::io::stdout(), &points[..points.len().min(5)])?;
    }
    Ok(())
}
