//! Seeded random search; each trial is a full LOSO run scored by mean validation RMSE.

use std::time::Duration;

use sleepcast::data::{generate_synthetic, preprocess, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::experiment::{random_search, run_loso, FoldPlan, TrainConfig};
use sleepcast::model::{ModelKind, SearchSpace};
use sleepcast::window::WindowConfig;
use sleepcast_kernel::Rng;

fn main() -> sleepcast::Result<()> {
    let cfg = SyntheticConfig {
        n_subjects: 4,
        n_days: 50,
        ..Default::default()
    };
    let data = preprocess(&generate_synthetic(&cfg, 3)?, &DEFAULT_DROP_FEATURES)?.datasets;

    // keep trials cheap: narrow the widths, leave the rest of the space as is
    let space = SearchSpace {
        cnn_hidden_size: vec![8, 16],
        lstm_hidden_size: vec![8, 16],
        ..SearchSpace::default()
    };
    println!("search space: {} points", space.cardinality());

    let mut rng = Rng::new(42);
    let result = random_search(&space, 4, &mut rng, Some(Duration::from_secs(120)), |i, hp| {
        let plan = FoldPlan {
            model: ModelKind::AdaSt,
            hyperparams: hp.clone(),
            window: WindowConfig::new(7, 1)?,
            train: TrainConfig {
                epochs: 20,
                ..Default::default()
            },
            master_seed: i as u64,
            keep_series: false,
        };
        Ok(run_loso(&data, &plan)?.into_iter().map(|(t, _)| t).collect())
    })?;

    for t in &result.trials {
        let score = t.mean_val_rmse.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "trial {}: conv {} lstm {} cnn {} hidden {} alpha {} bs {}  val {score}{}",
            t.index,
            t.hyperparams.num_conv_layers,
            t.hyperparams.num_lstm_layers,
            t.hyperparams.cnn_hidden_size,
            t.hyperparams.lstm_hidden_size,
            t.hyperparams.alpha,
            t.hyperparams.batch_size,
            t.error.as_deref().map_or(String::new(), |e| format!("  ({e})"))
        );
    }
    println!("best: {:?}", result.best);
    Ok(())
}
