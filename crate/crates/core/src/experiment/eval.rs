use sleepcast_kernel::{ForwardCtx, Tape};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::window::{Batch, WindowedInstance};

const EVAL_BATCH: usize = 256;

/// Root mean square error over all entries, without smoothing.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "rmse of {} predictions against {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::NoInstances("score"));
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Eval-mode predictions, one `H`-vector per instance.
pub fn predict(model: &Model, instances: &[WindowedInstance]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(EVAL_BATCH) {
        let batch = Batch::from_instances(&chunk.iter().collect::<Vec<_>>())?;
        let mut tape = Tape::new();
        let x = tape.constant(batch.x);
        let y = model.forward(&mut tape, &mut ForwardCtx::eval(), x, false)?.y;
        let h = model.dims.horizon;
        out.extend(tape.value(y).data().chunks(h).map(<[f64]>::to_vec));
    }
    Ok(out)
}

fn targets(instances: &[WindowedInstance]) -> Vec<f64> {
    instances.iter().flat_map(|i| i.y.data().iter().copied()).collect()
}

/// RMSE of `model` over every predicted entry of `instances`, in normalized units.
pub fn evaluate(model: &Model, instances: &[WindowedInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::NoInstances("evaluate"));
    }
    let pred: Vec<f64> = predict(model, instances)?.concat();
    rmse(&pred, &targets(instances))
}

/// RMSE of predicting the mean target of `instances` themselves.
pub fn mean_predictor_rmse(instances: &[WindowedInstance]) -> Result<f64> {
    let t = targets(instances);
    if t.is_empty() {
        return Err(Error::NoInstances("evaluate"));
    }
    let m = t.iter().sum::<f64>() / t.len() as f64;
    rmse(&vec![m; t.len()], &t)
}
