//! Train one fold, save the model, reload it and confirm identical predictions.

use sleepcast::data::{generate_synthetic, preprocess, SubjectId, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::experiment::{loso_folds, predict, prepare_fold, run_fold, DomainIndex, FoldPlan, TrainConfig};
use sleepcast::model::{HyperParams, Model, ModelKind};
use sleepcast::window::WindowConfig;

fn main() -> sleepcast::Result<()> {
    let cfg = SyntheticConfig {
        n_subjects: 4,
        n_days: 50,
        ..Default::default()
    };
    let data = preprocess(&generate_synthetic(&cfg, 2)?, &DEFAULT_DROP_FEATURES)?.datasets;
    let ids: Vec<SubjectId> = data.iter().map(|d| d.subject).collect();
    let fold = loso_folds(&ids)?.remove(0);
    let plan = FoldPlan {
        model: ModelKind::AdaSt,
        hyperparams: HyperParams {
            use_batchnorm: true,
            ..HyperParams::default()
        },
        window: WindowConfig::new(5, 3)?,
        train: TrainConfig {
            epochs: 5,
            ..Default::default()
        },
        master_seed: 2,
        keep_series: false,
    };
    let (trial, model) = run_fold(&data, &DomainIndex::new(&ids), &fold, &plan)?;
    println!(
        "fold {}: test RMSE {:.4} after {} epochs",
        fold.test,
        trial.test_rmse,
        trial.epochs_completed()
    );

    let path = std::env::temp_dir().join("sleepcast_checkpoint_example.json");
    model.save(&path)?;
    let loaded = Model::load(&path)?;
    let test = prepare_fold(&data, &fold, &plan.window)?.test;
    let same = predict(&model, &test)? == predict(&loaded, &test)?;
    println!(
        "{} parameters saved to {}; reloaded predictions identical: {same}",
        loaded.num_params(),
        path.display()
    );
    Ok(())
}
