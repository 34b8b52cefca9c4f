//! A small window/horizon grid with two models, rendered as line charts and a radar chart.
//!
//! cargo run --release --example grid -- [out_dir]

use std::fs;
use std::path::PathBuf;

use sleepcast::data::{generate_synthetic, preprocess, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::experiment::{run_grid, GridSpec, TrainConfig};
use sleepcast::model::{HyperParams, ModelKind};
use sleepcast::report::{line_svgs, radar_data, radar_svg};

fn main() -> sleepcast::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "grid_example".into()));
    let cfg = SyntheticConfig {
        n_subjects: 5,
        n_days: 60,
        ..Default::default()
    };
    let data = preprocess(&generate_synthetic(&cfg, 5)?, &DEFAULT_DROP_FEATURES)?.datasets;
    let spec = GridSpec {
        windows: vec![3, 7],
        horizons: vec![1, 5, 9],
        models: vec![ModelKind::AdaSt, ModelKind::Mlp],
        hyperparams: HyperParams {
            cnn_hidden_size: 8,
            lstm_hidden_size: 16,
            ..HyperParams::default()
        },
        train: TrainConfig {
            epochs: 40,
            ..Default::default()
        },
        master_seed: 5,
    };
    let grid = run_grid(&data, &spec)?;
    for c in &grid.cells {
        println!(
            "{:<6} W={:<2} H={:<2} RMSE {:.4}",
            c.model.to_string(),
            c.window,
            c.horizon,
            c.mean_test_rmse
        );
    }

    fs::create_dir_all(&out).map_err(|e| sleepcast::Error::InvalidParameter(e.to_string()))?;
    let write = |name: String, svg: String| fs::write(out.join(&name), svg).map(|_| println!("wrote {}", out.join(name).display()));
    for (model, svg) in line_svgs(&grid) {
        write(format!("lines_{model}.svg"), svg).ok();
    }
    if let Some(radar) = radar_data(&grid, ModelKind::AdaSt) {
        write("radar.svg".into(), radar_svg(&radar)).ok();
    }
    Ok(())
}
