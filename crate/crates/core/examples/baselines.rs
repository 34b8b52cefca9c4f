//! AdaST against the four baselines on the same folds, seeds and window.

use sleepcast::data::{generate_synthetic, preprocess, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::experiment::{run_loso, FoldPlan, TrainConfig, TrainSummary};
use sleepcast::model::{param_count, Dims, HyperParams, ModelKind};
use sleepcast::window::WindowConfig;

fn main() -> sleepcast::Result<()> {
    let cfg = SyntheticConfig {
        n_subjects: 10,
        n_days: 120,
        ..Default::default()
    };
    let data = preprocess(&generate_synthetic(&cfg, 9)?, &DEFAULT_DROP_FEATURES)?.datasets;
    let hp = HyperParams {
        cnn_hidden_size: 16,
        lstm_hidden_size: 32,
        ..HyperParams::default()
    };
    let dims = Dims {
        features: data[0].num_features(),
        window: 7,
        horizon: 1,
        domains: data.len(),
    };
    println!(
        "{:<7} {:>7} {:>10} {:>13} {:>6}",
        "model", "params", "test RMSE", "subject mean", "wins"
    );
    for model in ModelKind::ALL {
        let plan = FoldPlan {
            model,
            hyperparams: hp.clone(),
            window: WindowConfig::new(7, 1)?,
            train: TrainConfig {
                epochs: 50,
                lr: 3e-3,
                ..Default::default()
            },
            master_seed: 9,
            keep_series: false,
        };
        let trials: Vec<_> = run_loso(&data, &plan)?.into_iter().map(|(t, _)| t).collect();
        let s = TrainSummary::from_trials(&trials).expect("folds ran");
        println!(
            "{:<7} {:>7} {:>10.4} {:>13.4} {:>3}/{}",
            model.to_string(),
            param_count(model, &hp, &dims),
            s.mean_test_rmse,
            s.mean_subject_mean_rmse,
            s.folds_beating_subject_mean,
            s.folds
        );
    }
    Ok(())
}
