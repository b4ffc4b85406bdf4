use super::config::ModelConfig;
use super::params::{AttentionLayer, ModelParams};
use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::event_model::{DaySlice, FirmPeriodObservation, Mode};

/// Tape handles for one attention layer. `output_blocks[h]` is the row block
/// of W^O that head `h` projects through.
#[derive(Clone, Debug)]
pub struct LayerLeaves {
    pub query: Vec<Var>,
    pub key: Vec<Var>,
    pub value: Vec<Var>,
    pub output: Var,
    pub output_blocks: Vec<Var>,
}

/// Dense (non-table) parameters registered as tape leaves. Embedding tables
/// stay off the tape; rows enter through gather leaves.
#[derive(Clone, Debug)]
pub struct ParamLeaves {
    pub cls_daily: Var,
    pub cls_weekly: Var,
    pub daily: Vec<LayerLeaves>,
    pub weekly: Vec<LayerLeaves>,
    pub mlp: Vec<(Var, Var)>,
    pub head_dim: usize,
}

fn register_layer(tape: &mut Tape, layer: &AttentionLayer) -> Result<LayerLeaves> {
    let query = layer.query.iter().map(|m| tape.leaf(m.clone())).collect();
    let key = layer.key.iter().map(|m| tape.leaf(m.clone())).collect();
    let value: Vec<Var> = layer.value.iter().map(|m| tape.leaf(m.clone())).collect();
    let output = tape.leaf(layer.output.clone());
    let heads = value.len();
    let dv = layer.output.rows() / heads.max(1);
    let output_blocks = (0..heads)
        .map(|h| tape.slice_rows(output, h * dv, dv))
        .collect::<Result<_>>()?;
    Ok(LayerLeaves {
        query,
        key,
        value,
        output,
        output_blocks,
    })
}

impl ParamLeaves {
    pub fn register(tape: &mut Tape, params: &ModelParams) -> Result<Self> {
        let cls_daily = tape.leaf(params.cls_daily.clone());
        let cls_weekly = tape.leaf(params.cls_weekly.clone());
        let daily = params.daily.iter().map(|l| register_layer(tape, l)).collect::<Result<_>>()?;
        let weekly = params.weekly.iter().map(|l| register_layer(tape, l)).collect::<Result<_>>()?;
        let mlp = params
            .mlp
            .iter()
            .map(|d| (tape.leaf(d.weight.clone()), tape.leaf(d.bias.clone())))
            .collect();
        let head_dim = params
            .daily
            .iter()
            .chain(&params.weekly)
            .next()
            .map_or(params.cls_daily.cols(), |l| l.query[0].cols());
        Ok(Self {
            cls_daily,
            cls_weekly,
            daily,
            weekly,
            mlp,
            head_dim,
        })
    }

    /// Copies leaf gradients into the matching dense tensors of `grad`,
    /// scaled by `k`.
    pub fn accumulate(&self, g: &crate::autodiff::Gradients, grad: &mut ModelParams, k: f64) {
        let add = |dst: &mut Matrix, v: Var| {
            if let Some(gv) = g.get(v) {
                dst.add_scaled(gv, k);
            }
        };
        add(&mut grad.cls_daily, self.cls_daily);
        add(&mut grad.cls_weekly, self.cls_weekly);
        for (dst, src) in grad.daily.iter_mut().zip(&self.daily).chain(grad.weekly.iter_mut().zip(&self.weekly)) {
            for (d, &v) in dst.query.iter_mut().zip(&src.query) {
                add(d, v);
            }
            for (d, &v) in dst.key.iter_mut().zip(&src.key) {
                add(d, v);
            }
            for (d, &v) in dst.value.iter_mut().zip(&src.value) {
                add(d, v);
            }
            add(&mut dst.output, src.output);
        }
        for (dst, &(w, b)) in grad.mlp.iter_mut().zip(&self.mlp) {
            add(&mut dst.weight, w);
            add(&mut dst.bias, b);
        }
    }
}

/// Lookup nodes for the real events of one day.
#[derive(Clone, Debug)]
pub struct EventNodes {
    /// Slot index in the day slice for each row of the lookups below.
    pub slots: Vec<usize>,
    pub subject: Var,
    pub action: Var,
    pub object: Var,
    /// subject + action − object, one row per entry of `slots`.
    pub events: Var,
}

#[derive(Clone, Debug)]
pub struct DayTrace {
    pub events: Option<EventNodes>,
    pub z_daily: Var,
}

/// Handles into a recorded forward pass, for attribution and training.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub stock: Var,
    pub days: Vec<DayTrace>,
    /// z_Daily in daily mode, z_Weekly in weekly mode.
    pub representation: Var,
    pub output: Var,
}

/// Forward-pass switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForwardOptions {
    /// Drop PAD slots from the attention sequence instead of key-masking them.
    /// Masked keys get exactly zero weight, so [CLS] outputs are unchanged.
    pub compact: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self { compact: true }
    }
}

fn check_ids(table: &'static str, ids: &[usize], size: usize) -> Result<()> {
    match ids.iter().find(|&&id| id >= size) {
        Some(&id) => Err(Error::OutOfVocabulary { table, id, size }),
        None => Ok(()),
    }
}

/// TransE rows z = e_subject + e_action − e_object for the given slots.
pub fn encode_slots(tape: &mut Tape, params: &ModelParams, day: &DaySlice, slots: &[usize]) -> Result<EventNodes> {
    let subj: Vec<usize> = slots.iter().map(|&s| day.events[s].subject.index()).collect();
    let act: Vec<usize> = slots.iter().map(|&s| day.events[s].action.index()).collect();
    let obj: Vec<usize> = slots.iter().map(|&s| day.events[s].object.index()).collect();
    check_ids("entity", &subj, params.entity.rows())?;
    check_ids("action", &act, params.action.rows())?;
    check_ids("entity", &obj, params.entity.rows())?;
    let subject = tape.embedding_lookup(&params.entity, &subj)?;
    let action = tape.embedding_lookup(&params.action, &act)?;
    let object = tape.embedding_lookup(&params.entity, &obj)?;
    let sa = tape.add(subject, action)?;
    let events = tape.sub(sa, object)?;
    Ok(EventNodes {
        slots: slots.to_vec(),
        subject,
        action,
        object,
        events,
    })
}

/// All N_max slots of a day (PAD rows included) as an N_max×M matrix plus mask.
pub fn encode_events(day: &DaySlice, params: &ModelParams) -> Result<(Matrix, Vec<bool>)> {
    let mut tape = Tape::new();
    let slots: Vec<usize> = (0..day.events.len()).collect();
    if slots.is_empty() {
        return Ok((Matrix::zeros(0, params.entity.cols()), Vec::new()));
    }
    let nodes = encode_slots(&mut tape, params, day, &slots)?;
    Ok((tape.value(nodes.events).clone(), day.mask.clone()))
}

fn attention_layer(tape: &mut Tape, x: Var, mask: &[bool], layer: &LayerLeaves, head_dim: usize, first_row_only: bool) -> Result<Var> {
    let q_in = if first_row_only { tape.slice_row(x, 0)? } else { x };
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut acc: Option<Var> = None;
    for h in 0..layer.query.len() {
        let q = tape.matmul(q_in, layer.query[h])?;
        let k = tape.matmul(x, layer.key[h])?;
        let v = tape.matmul(x, layer.value[h])?;
        let scores = tape.matmul_t(q, k)?;
        let scores = tape.scale(scores, scale);
        let weights = tape.masked_softmax_rows(scores, mask)?;
        let head = tape.matmul(weights, v)?;
        let proj = tape.matmul(head, layer.output_blocks[h])?;
        acc = Some(match acc {
            Some(a) => tape.add(a, proj)?,
            None => proj,
        });
    }
    acc.ok_or_else(|| Error::Invalid("attention layer without heads".into()))
}

/// Runs `layers` over `seq` (T×M) with key mask `mask`. With
/// `first_row_only`, the last layer only computes row 0 and the result is 1×M.
pub fn attention_stack(
    tape: &mut Tape,
    seq: Var,
    mask: &[bool],
    layers: &[LayerLeaves],
    head_dim: usize,
    first_row_only: bool,
) -> Result<Var> {
    let (t, _) = tape.value(seq).shape();
    if t == 0 || mask.len() != t {
        return Err(Error::Shape {
            op: "attention_stack",
            detail: format!("sequence of {t} rows with mask of {}", mask.len()),
        });
    }
    if !mask[0] {
        return Err(Error::Invalid("position 0 must be unmasked".into()));
    }
    let mut x = seq;
    for (i, layer) in layers.iter().enumerate() {
        let last = i + 1 == layers.len();
        x = attention_layer(tape, x, mask, layer, head_dim, first_row_only && last)?;
    }
    if first_row_only && layers.is_empty() {
        x = tape.slice_row(x, 0)?;
    }
    Ok(x)
}

/// Value-level attention over plain matrices; returns all T rows.
pub fn attention_values(seq: &Matrix, mask: &[bool], layers: &[AttentionLayer]) -> Result<Matrix> {
    let mut tape = Tape::new();
    let x = tape.leaf(seq.clone());
    let leaves = layers.iter().map(|l| register_layer(&mut tape, l)).collect::<Result<Vec<_>>>()?;
    let head_dim = layers.first().map_or(seq.cols(), |l| l.query[0].cols());
    let out = attention_stack(&mut tape, x, mask, &leaves, head_dim, false)?;
    Ok(tape.value(out).clone())
}

fn daily_on_tape(
    tape: &mut Tape,
    params: &ModelParams,
    leaves: &ParamLeaves,
    day: &DaySlice,
    stock: Var,
    opts: ForwardOptions,
) -> Result<DayTrace> {
    if day.mask.len() != day.events.len() {
        return Err(Error::Shape {
            op: "daily_forward",
            detail: format!("{} event slots with mask of {}", day.events.len(), day.mask.len()),
        });
    }
    let slots: Vec<usize> = if opts.compact {
        (0..day.events.len()).filter(|&i| day.mask[i]).collect()
    } else {
        (0..day.events.len()).collect()
    };
    let events = if slots.is_empty() {
        None
    } else {
        Some(encode_slots(tape, params, day, &slots)?)
    };
    let mut parts = vec![leaves.cls_daily];
    let mut mask = vec![true];
    if let Some(ev) = &events {
        parts.push(ev.events);
        mask.extend(slots.iter().map(|&s| day.mask[s]));
    }
    parts.push(stock);
    mask.push(true);
    let seq = tape.concat_rows(&parts)?;
    let z_daily = attention_stack(tape, seq, &mask, &leaves.daily, leaves.head_dim, true)?;
    Ok(DayTrace { events, z_daily })
}

/// Records the full network for one observation on `tape`.
pub fn forward_on_tape(
    tape: &mut Tape,
    params: &ModelParams,
    leaves: &ParamLeaves,
    obs: &FirmPeriodObservation,
    mode: Mode,
    opts: ForwardOptions,
) -> Result<ForwardTrace> {
    let layout_ok = match mode {
        Mode::Daily => obs.days.len() == 1,
        Mode::Weekly => !obs.days.is_empty(),
    };
    if !layout_ok {
        return Err(Error::Shape {
            op: "forward",
            detail: format!("{mode:?} mode cannot take {} day slices", obs.days.len()),
        });
    }
    let sid = obs.stock.index();
    check_ids("stock", &[sid], params.stock.rows())?;
    let stock = tape.embedding_lookup(&params.stock, &[sid])?;
    let mut days = Vec::with_capacity(obs.days.len());
    for day in &obs.days {
        days.push(daily_on_tape(tape, params, leaves, day, stock, opts)?);
    }
    let representation = match mode {
        Mode::Daily => days[0].z_daily,
        Mode::Weekly => {
            let mut parts = vec![leaves.cls_weekly];
            parts.extend(days.iter().map(|d| d.z_daily));
            let seq = tape.concat_rows(&parts)?;
            let mask = vec![true; parts.len()];
            attention_stack(tape, seq, &mask, &leaves.weekly, leaves.head_dim, true)?
        }
    };
    let mut h = representation;
    for (s, &(w, b)) in leaves.mlp.iter().enumerate() {
        let hw = tape.matmul(h, w)?;
        h = tape.add(hw, b)?;
        if s + 1 < leaves.mlp.len() {
            h = tape.relu(h);
        }
    }
    Ok(ForwardTrace {
        stock,
        days,
        representation,
        output: h,
    })
}

/// Checks that an observation's layout matches the config.
pub fn check_layout(obs: &FirmPeriodObservation, cfg: &ModelConfig, mode: Mode) -> Result<()> {
    let days = match mode {
        Mode::Daily => 1,
        Mode::Weekly => cfg.days_per_week,
    };
    if obs.days.len() != days {
        return Err(Error::Shape {
            op: "predict",
            detail: format!("{mode:?} mode with D={} expects {days} day slices, got {}", cfg.days_per_week, obs.days.len()),
        });
    }
    Ok(())
}

/// A self-contained forward pass with its own tape.
pub struct Graph {
    pub tape: Tape,
    pub leaves: ParamLeaves,
    pub trace: ForwardTrace,
}

impl Graph {
    pub fn build(params: &ModelParams, obs: &FirmPeriodObservation, mode: Mode, opts: ForwardOptions) -> Result<Self> {
        let mut tape = Tape::new();
        let leaves = ParamLeaves::register(&mut tape, params)?;
        let trace = forward_on_tape(&mut tape, params, &leaves, obs, mode, opts)?;
        Ok(Self { tape, leaves, trace })
    }

    pub fn prediction(&self) -> f64 {
        self.tape.value(self.trace.output).item()
    }
}

/// z_Daily for a single day slice.
pub fn daily_forward(day: &DaySlice, stock: crate::event_model::StockIndex, params: &ModelParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let leaves = ParamLeaves::register(&mut tape, params)?;
    check_ids("stock", &[stock.index()], params.stock.rows())?;
    let s = tape.embedding_lookup(&params.stock, &[stock.index()])?;
    let d = daily_on_tape(&mut tape, params, &leaves, day, s, ForwardOptions::default())?;
    Ok(tape.value(d.z_daily).clone())
}

/// z_Weekly for a week of day slices.
pub fn weekly_forward(days: &[DaySlice], stock: crate::event_model::StockIndex, params: &ModelParams) -> Result<Matrix> {
    let obs = FirmPeriodObservation {
        stock_id: 0,
        stock,
        period: chrono::NaiveDate::MIN,
        days: days.to_vec(),
        contexts: Vec::new(),
        target_return: 0.0,
    };
    let g = Graph::build(params, &obs, Mode::Weekly, ForwardOptions::default())?;
    Ok(g.tape.value(g.trace.representation).clone())
}

/// Model prediction ŷ for one observation.
pub fn predict(obs: &FirmPeriodObservation, params: &ModelParams, mode: Mode) -> Result<f64> {
    Ok(Graph::build(params, obs, mode, ForwardOptions::default())?.prediction())
}

/// Predictions for many observations, in input order. Each prediction is an
/// independent computation, so the parallel map is deterministic.
pub fn predict_many(observations: &[&FirmPeriodObservation], params: &ModelParams, mode: Mode) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let chunks: Vec<Result<Vec<f64>>> = observations
        .par_chunks(256)
        .map(|chunk| {
            let mut tape = Tape::new();
            let leaves = ParamLeaves::register(&mut tape, params)?;
            let mut out = Vec::with_capacity(chunk.len());
            for obs in chunk {
                let base = tape.len();
                let tr = forward_on_tape(&mut tape, params, &leaves, obs, mode, ForwardOptions::default())?;
                out.push(tape.value(tr.output).item());
                tape.truncate(base);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(observations.len());
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}
