use super::forward::{ForwardOptions, Graph};
use super::params::{ModelParams, Table};
use crate::autodiff::{relative_error, Gradients, Tape, Var};
use crate::error::Result;
use crate::event_model::{FirmPeriodObservation, Mode};

fn scatter(tape: &Tape, g: &Gradients, v: Var, table: Table, grad: &mut ModelParams) {
    g.scatter_add(tape, v, grad.table_mut(table), 1.0);
}

/// ŷ and ∂ŷ/∂θ for every parameter, embedding tables included.
pub fn prediction_gradient(params: &ModelParams, obs: &FirmPeriodObservation, mode: Mode) -> Result<(f64, ModelParams)> {
    let g = Graph::build(params, obs, mode, ForwardOptions::default())?;
    let grads = g.tape.backward(g.trace.output)?;
    let mut out = params.zeros_like();
    g.leaves.accumulate(&grads, &mut out, 1.0);
    scatter(&g.tape, &grads, g.trace.stock, Table::Stock, &mut out);
    for day in &g.trace.days {
        if let Some(ev) = &day.events {
            scatter(&g.tape, &grads, ev.subject, Table::Entity, &mut out);
            scatter(&g.tape, &grads, ev.action, Table::Action, &mut out);
            scatter(&g.tape, &grads, ev.object, Table::Entity, &mut out);
        }
    }
    Ok((g.prediction(), out))
}

/// Largest relative error between `prediction_gradient` and central
/// differences of ŷ over every scalar parameter.
pub fn model_grad_check(params: &ModelParams, obs: &FirmPeriodObservation, mode: Mode, eps: f64) -> Result<f64> {
    let (_, analytic) = prediction_gradient(params, obs, mode)?;
    let analytic = analytic.flatten();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut offset = 0;
    let n_tensors = params.tensors().len();
    for t in 0..n_tensors {
        let len = params.tensors()[t].data().len();
        for i in 0..len {
            let orig = probe.tensors()[t].data()[i];
            probe.tensors_mut()[t].data_mut()[i] = orig + eps;
            let up = super::forward::predict(obs, &probe, mode)?;
            probe.tensors_mut()[t].data_mut()[i] = orig - eps;
            let down = super::forward::predict(obs, &probe, mode)?;
            probe.tensors_mut()[t].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic[offset + i], numeric));
        }
        offset += len;
    }
    Ok(worst)
}
