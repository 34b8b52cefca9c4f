//! Finite-difference check of every AdaST parameter on a tiny configuration.

use sleepcast::experiment::objective;
use sleepcast::model::{Dims, HyperParams, Model, ModelKind};
use sleepcast_kernel::gradcheck::{grad_check_params, DEFAULT_FD_EPS};
use sleepcast_kernel::{ForwardCtx, HasParams, Rng, Tensor};

fn main() -> sleepcast::Result<()> {
    let dims = Dims {
        features: 5,
        window: 4,
        horizon: 2,
        domains: 3,
    };
    let hp = HyperParams {
        num_conv_layers: 2,
        cnn_hidden_size: 4,
        lstm_hidden_size: 5,
        dropout_cnn: 0.0,
        dropout_lstm: 0.0,
        alpha: 0.5,
        ..HyperParams::default()
    };
    let mut rng = Rng::new(1);
    let mut model = Model::new(ModelKind::AdaSt, &hp, dims, &mut rng)?;
    let b = 6;
    let x = Tensor::new(
        &[b, dims.window, dims.features],
        (0..b * dims.window * dims.features).map(|_| rng.normal()).collect(),
    )?;
    let y = Tensor::new(&[b, dims.horizon], (0..b * dims.horizon).map(|_| rng.normal()).collect())?;
    let labels = [0, 1, 2, 0, 1, 2];

    let report = grad_check_params(
        &mut model,
        |m, tape| {
            let xv = tape.constant(x.clone());
            let out = m.forward(tape, &mut ForwardCtx::eval(), xv, true).expect("forward");
            Ok(objective(tape, &out, &y, Some(&labels), hp.alpha).expect("loss").total)
        },
        DEFAULT_FD_EPS,
    )?;
    for (p, err) in model.store().params().iter().zip(&report.per_input) {
        println!("{:<24} {:>5} values  max rel error {err:.2e}", p.name, p.value.len());
    }
    println!("{} coordinates, worst {:.2e}", report.coordinates, report.max_rel_error);
    Ok(())
}
