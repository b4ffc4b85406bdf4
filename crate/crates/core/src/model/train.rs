use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::forward::{forward_on_tape, ForwardOptions, ForwardTrace, ParamLeaves};
use super::params::{ModelParams, Table};
use crate::autodiff::{Gradients, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::event_model::{FirmPeriodObservation, Mode, Panel, Vocabulary};
use crate::seeds;

/// Observations per gradient chunk. Chunks are summed in a fixed order, so
/// results do not depend on the number of worker threads.
const CHUNK: usize = 16;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Row counts of the three embedding tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSizes {
    pub entities: usize,
    pub actions: usize,
    pub stocks: usize,
}

impl TableSizes {
    pub fn of(vocab: &Vocabulary) -> Self {
        Self {
            entities: vocab.entities.len(),
            actions: vocab.actions.len(),
            stocks: vocab.n_stocks(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared error over each epoch's mini-batches, before each update.
    pub epoch_mse: Vec<f64>,
    /// ‖θ‖ at the end of each epoch.
    pub param_norms: Vec<f64>,
    pub params: ModelParams,
    pub seed: u64,
    /// Not covered by reproducibility guarantees.
    pub wall_time_secs: f64,
}

/// Loss and gradient for one mini-batch.
pub struct BatchGradient {
    /// Σ (ŷ − y)² over the batch.
    pub sse: f64,
    /// Σ TransE hinge terms over the batch's events (0 when disabled).
    pub hinge: f64,
    /// Gradient of the batch objective (without the L2 term).
    pub grad: ModelParams,
    /// Embedding rows looked up by the batch.
    pub touched: TouchedRows,
}

/// Per-table flags of the embedding rows a batch looked up.
#[derive(Clone, Debug, PartialEq)]
pub struct TouchedRows {
    pub entity: Vec<bool>,
    pub action: Vec<bool>,
    pub stock: Vec<bool>,
}

impl TouchedRows {
    pub fn none(params: &ModelParams) -> Self {
        Self {
            entity: vec![false; params.entity.rows()],
            action: vec![false; params.action.rows()],
            stock: vec![false; params.stock.rows()],
        }
    }

    pub fn all(params: &ModelParams) -> Self {
        Self {
            entity: vec![true; params.entity.rows()],
            action: vec![true; params.action.rows()],
            stock: vec![true; params.stock.rows()],
        }
    }

    fn mark(&mut self, table: Table, row: usize) {
        match table {
            Table::Entity => self.entity[row] = true,
            Table::Action => self.action[row] = true,
            Table::Stock => self.stock[row] = true,
        }
    }

    /// The table flags, in [`ModelParams::tensors`] order.
    fn by_tensor(&self) -> [&[bool]; 3] {
        [&self.entity, &self.action, &self.stock]
    }
}

struct ChunkGrad {
    sse: f64,
    hinge: f64,
    dense: ModelParams,
    rows: Vec<(Table, usize, Vec<f64>)>,
}

fn sparse_rows(tape: &Tape, g: &Gradients, lookup: Var, table: Table, out: &mut Vec<(Table, usize, Vec<f64>)>) {
    let (Some(ids), Some(gm)) = (tape.gather_ids(lookup), g.get(lookup)) else {
        return;
    };
    for (r, &id) in ids.iter().enumerate() {
        out.push((table, id, gm.row(r).to_vec()));
    }
}

struct AuxTerms {
    /// Corrupted-object lookups.
    negatives: Vec<Var>,
    loss: Option<Var>,
}

/// Margin loss Σ relu(margin + ‖z⁺‖² − ‖z⁻‖²) with z⁻ built from a random
/// replacement object.
fn transe_hinge(
    tape: &mut Tape,
    params: &ModelParams,
    traces: &[ForwardTrace],
    margin: f64,
    rng: &mut impl Rng,
) -> Result<AuxTerms> {
    let n_ent = params.entity.rows();
    let mut negatives = Vec::new();
    let mut loss: Option<Var> = None;
    let margin_c = tape.constant(Matrix::scalar(margin));
    for tr in traces {
        for day in &tr.days {
            let Some(ev) = &day.events else { continue };
            let n = ev.slots.len();
            let corrupt: Vec<usize> = (0..n)
                .map(|_| if n_ent > 2 { rng.gen_range(2..n_ent) } else { 0 })
                .collect();
            let neg_obj = tape.embedding_lookup(&params.entity, &corrupt)?;
            let sa = tape.add(ev.subject, ev.action)?;
            let neg = tape.sub(sa, neg_obj)?;
            negatives.push(neg_obj);
            for r in 0..n {
                let p = tape.slice_row(ev.events, r)?;
                let q = tape.slice_row(neg, r)?;
                let dp = tape.matmul_t(p, p)?;
                let dq = tape.matmul_t(q, q)?;
                let diff = tape.sub(dp, dq)?;
                let pre = tape.add(margin_c, diff)?;
                let h = tape.relu(pre);
                loss = Some(match loss {
                    Some(l) => tape.add(l, h)?,
                    None => h,
                });
            }
        }
    }
    Ok(AuxTerms { negatives, loss })
}

#[allow(clippy::too_many_arguments)]
fn chunk_gradient(
    params: &ModelParams,
    chunk: &[&FirmPeriodObservation],
    mode: Mode,
    cfg: &ModelConfig,
    batch_len: usize,
    batch_events: usize,
    aux_seed: u64,
) -> Result<ChunkGrad> {
    let mut tape = Tape::new();
    let leaves = ParamLeaves::register(&mut tape, params)?;
    let mut traces = Vec::with_capacity(chunk.len());
    for obs in chunk {
        traces.push(forward_on_tape(&mut tape, params, &leaves, obs, mode, ForwardOptions::default())?);
    }
    let outs: Vec<Var> = traces.iter().map(|t| t.output).collect();
    let pred = tape.concat_rows(&outs)?;
    let target = tape.constant(Matrix::from_vec(chunk.len(), 1, chunk.iter().map(|o| o.target_return).collect())?);
    let err = tape.sub(pred, target)?;
    let mse = tape.mean_sq(err);
    let sse = tape.value(mse).item() * chunk.len() as f64;
    let mut objective = tape.scale(mse, chunk.len() as f64 / batch_len as f64);

    let mut hinge = 0.0;
    let mut aux = AuxTerms { negatives: Vec::new(), loss: None };
    if cfg.transe_weight > 0.0 && batch_events > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(aux_seed);
        aux = transe_hinge(&mut tape, params, &traces, cfg.transe_margin, &mut rng)?;
        if let Some(l) = aux.loss {
            hinge = tape.value(l).item();
            let weighted = tape.scale(l, cfg.transe_weight / batch_events as f64);
            objective = tape.add(objective, weighted)?;
        }
    }

    let g = tape.backward(objective)?;
    let mut dense = params.dense_zeros_like();
    leaves.accumulate(&g, &mut dense, 1.0);
    let mut rows = Vec::new();
    for tr in &traces {
        sparse_rows(&tape, &g, tr.stock, Table::Stock, &mut rows);
        for day in &tr.days {
            if let Some(ev) = &day.events {
                sparse_rows(&tape, &g, ev.subject, Table::Entity, &mut rows);
                sparse_rows(&tape, &g, ev.action, Table::Action, &mut rows);
                sparse_rows(&tape, &g, ev.object, Table::Entity, &mut rows);
            }
        }
    }
    for &neg in &aux.negatives {
        sparse_rows(&tape, &g, neg, Table::Entity, &mut rows);
    }
    Ok(ChunkGrad { sse, hinge, dense, rows })
}

/// Gradient of (1/B)Σ(ŷ−y)² (+ optional weighted TransE term) for `batch`.
pub fn batch_gradient(
    params: &ModelParams,
    batch: &[&FirmPeriodObservation],
    mode: Mode,
    cfg: &ModelConfig,
    aux_stream: &str,
) -> Result<BatchGradient> {
    let batch_events: usize = batch.iter().map(|o| o.n_events()).sum();
    let chunks: Vec<Result<ChunkGrad>> = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(i, c)| {
            let seed = seeds::derive(cfg.seed, &format!("{aux_stream}/{i}"));
            chunk_gradient(params, c, mode, cfg, batch.len(), batch_events, seed)
        })
        .collect();
    let mut grad = params.zeros_like();
    let mut touched = TouchedRows::none(params);
    let mut sse = 0.0;
    let mut hinge = 0.0;
    for c in chunks {
        let c = c?;
        sse += c.sse;
        hinge += c.hinge;
        grad.add_dense(&c.dense);
        for (table, row, g) in c.rows {
            touched.mark(table, row);
            for (d, s) in grad.table_mut(table).row_mut(row).iter_mut().zip(&g) {
                *d += s;
            }
        }
    }
    Ok(BatchGradient { sse, hinge, grad, touched })
}

/// Adaptive-moment optimizer state.
#[derive(Clone, Debug)]
pub struct Adam {
    m: ModelParams,
    v: ModelParams,
    step: i32,
}

impl Adam {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    /// One update on objective + l2·Σθ². Embedding rows outside `touched`
    /// are left alone, moments included: a row absent from the batch has no
    /// data gradient, and its penalty gradient alone, once normalized by the
    /// second moment, would pull it to zero at the full learning rate.
    pub fn update(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64, l2: f64, touched: &TouchedRows) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let ps = params.tensors_mut();
        let gs = grad.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        let rows = touched.by_tensor();
        for (t, (((p, g), m), v)) in ps.into_iter().zip(gs).zip(ms).zip(vs).enumerate() {
            let cols = p.cols();
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                if t < rows.len() && !rows[t][i / cols] {
                    continue;
                }
                let gi = g[i] + 2.0 * l2 * p[i];
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Mean squared prediction error over a panel.
pub fn evaluate_mse(panel: &Panel, params: &ModelParams) -> Result<f64> {
    let obs: Vec<&FirmPeriodObservation> = panel.observations().collect();
    if obs.is_empty() {
        return Err(Error::Insufficient("empty panel".into()));
    }
    let preds = super::forward::predict_many(&obs, params, panel.mode)?;
    Ok(obs.iter().zip(&preds).map(|(o, p)| (p - o.target_return).powi(2)).sum::<f64>() / obs.len() as f64)
}

/// Fresh initialization from the config seed, then training.
pub fn train(panel: &Panel, sizes: TableSizes, cfg: &ModelConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut rng = seeds::rng(cfg.seed, "init");
    let params = ModelParams::init(cfg, sizes.entities, sizes.actions, sizes.stocks, &mut rng);
    train_from(panel, params, cfg)
}

/// Trains starting from `params`.
pub fn train_from(panel: &Panel, mut params: ModelParams, cfg: &ModelConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let started = Instant::now();
    let observations: Vec<&FirmPeriodObservation> = panel.observations().collect();
    if observations.is_empty() {
        return Err(Error::Insufficient("training panel is empty".into()));
    }
    for o in &observations {
        super::forward::check_layout(o, cfg, panel.mode)?;
    }
    let mut order: Vec<usize> = (0..observations.len()).collect();
    let mut shuffle = seeds::rng(cfg.seed, "shuffle");
    let mut adam = Adam::new(&params);
    let mut epoch_mse = Vec::with_capacity(cfg.epochs);
    let mut param_norms = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut sse = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&FirmPeriodObservation> = idx.iter().map(|&i| observations[i]).collect();
            let bg = batch_gradient(&params, &batch, panel.mode, cfg, &format!("transe/{epoch}/{b}"))?;
            if !bg.sse.is_finite() || !bg.hinge.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {} batch {b} (sse {}, hinge {})",
                    epoch + 1,
                    bg.sse,
                    bg.hinge
                )));
            }
            sse += bg.sse;
            adam.update(&mut params, &bg.grad, cfg.lr, cfg.l2, &bg.touched);
        }
        if !params.is_finite() {
            return Err(Error::Diverged(format!("non-finite parameters after epoch {}", epoch + 1)));
        }
        let mse = sse / observations.len() as f64;
        log::debug!("epoch {} mse {mse:.6e}", epoch + 1);
        epoch_mse.push(mse);
        param_norms.push(params.sum_sq().sqrt());
    }
    Ok(TrainReport {
        epoch_mse,
        param_norms,
        params,
        seed: cfg.seed,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}
