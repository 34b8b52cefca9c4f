//! The full 16-subject LOSO run at W=7, H=1 on one thread, fold by fold.
//!
//! cargo run --release --example loso_train

use std::time::Instant;

use sleepcast::data::{generate_synthetic, preprocess, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::experiment::{run_loso, FoldPlan, TrainConfig, TrainSummary};
use sleepcast::model::{HyperParams, ModelKind};
use sleepcast::window::WindowConfig;

fn main() -> sleepcast::Result<()> {
    let raw = generate_synthetic(&SyntheticConfig::default(), 7)?;
    let data = preprocess(&raw, &DEFAULT_DROP_FEATURES)?.datasets;
    let plan = FoldPlan {
        model: ModelKind::AdaSt,
        hyperparams: HyperParams {
            gradient_reversal: true,
            ..HyperParams::default()
        },
        window: WindowConfig::new(7, 1)?,
        train: TrainConfig::default(),
        master_seed: 7,
        keep_series: false,
    };
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    let out = pool.install(|| run_loso(&data, &plan))?;
    let trials: Vec<_> = out.into_iter().map(|(t, _)| t).collect();
    for t in &trials {
        let h = &t.training.history;
        println!(
            "subject {:>2}: test {:.4}  subject-mean {:.4}  epochs {}  best {}  train L_main {:.4} -> {:.4}",
            t.fold.test.to_string(),
            t.test_rmse,
            t.subject_mean_rmse,
            h.len(),
            t.training.best_epoch,
            h[0].train_main,
            h.last().unwrap().train_main
        );
    }
    let s = TrainSummary::from_trials(&trials).unwrap();
    println!("{s:?}\nelapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
