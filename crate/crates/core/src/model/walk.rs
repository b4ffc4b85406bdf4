use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{ModelConfig, ModelPresets};
use super::forward::predict_many;
use super::train::{train, TableSizes, TrainReport};
use crate::error::{Error, Result};
use crate::event_model::{
    encode_records, FirmPeriodObservation, Mode, ObservationConfig, Panel, PanelRecord, Split, Vocabulary,
};
use crate::seeds;

/// One out-of-sample prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub date: NaiveDate,
    pub stock_id: i64,
    pub prediction: f64,
    pub realized: f64,
}

pub struct WindowResult {
    pub split: Split,
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    pub predictions: Vec<Prediction>,
}

/// Encodes `train` with a fresh vocabulary and `test` against it (unseen
/// tokens become UNK).
pub fn encode_window(
    train: &[PanelRecord],
    test: &[PanelRecord],
    mode: Mode,
    cfg: &ModelConfig,
) -> Result<(Vocabulary, Panel, Panel, Vec<String>)> {
    let obs_cfg = ObservationConfig {
        max_events: cfg.max_events,
        days_per_week: cfg.days_per_week,
    };
    let mut vocab = Vocabulary::new();
    let (train_panel, mut warnings) = encode_records(train, mode, &obs_cfg, &mut vocab, true)?;
    let (test_panel, w2) = encode_records(test, mode, &obs_cfg, &mut vocab, false)?;
    warnings.extend(w2);
    Ok((vocab, train_panel, test_panel, warnings))
}

/// Predictions for every observation of `panel`, in (period, stock) order.
pub fn predict_panel(panel: &Panel, ckpt: &Checkpoint) -> Result<Vec<Prediction>> {
    let mut obs: Vec<&FirmPeriodObservation> = panel.observations().collect();
    obs.sort_by_key(|o| (o.period, o.stock_id));
    let preds = predict_many(&obs, &ckpt.params, panel.mode)?;
    Ok(obs
        .iter()
        .zip(preds)
        .map(|(o, p)| Prediction {
            date: o.period,
            stock_id: o.stock_id,
            prediction: p,
            realized: o.target_return,
        })
        .collect())
}

/// Trains one window from scratch and predicts its test span.
pub fn run_window(
    train_records: &[PanelRecord],
    test_records: &[PanelRecord],
    mode: Mode,
    cfg: &ModelConfig,
) -> Result<(Checkpoint, TrainReport, Vec<Prediction>)> {
    let (vocab, train_panel, test_panel, warnings) = encode_window(train_records, test_records, mode, cfg)?;
    for w in warnings.iter().take(20) {
        log::warn!("{w}");
    }
    if train_panel.is_empty() {
        return Err(Error::Insufficient("training window has no observations".into()));
    }
    let report = train(&train_panel, TableSizes::of(&vocab), cfg)?;
    let cal = train_panel.calendar();
    let mut ckpt = Checkpoint::new(mode, cfg.clone(), vocab, report.params.clone());
    ckpt.train_span = cal.first().copied().zip(cal.last().copied());
    ckpt.epoch_mse = report.epoch_mse.clone();
    let predictions = if test_panel.is_empty() {
        Vec::new()
    } else {
        predict_panel(&test_panel, &ckpt)?
    };
    Ok((ckpt, report, predictions))
}

/// Walk-forward training over `splits`: every window gets a fresh vocabulary,
/// freshly initialized tables and its own derived seed.
pub fn walk_forward(
    records: &[PanelRecord],
    splits: &[Split],
    mode: Mode,
    base: &ModelConfig,
    presets: &ModelPresets,
) -> Result<Vec<WindowResult>> {
    let mut out = Vec::with_capacity(splits.len());
    for split in splits {
        let number = split.index + 1;
        let mut cfg = presets.for_split(number, base).clone();
        cfg.seed = seeds::derive(base.seed, &format!("window/{number}"));
        let (tr, te) = split.apply_records(records);
        let tr: Vec<PanelRecord> = tr.into_iter().cloned().collect();
        let te: Vec<PanelRecord> = te.into_iter().cloned().collect();
        log::info!("split {number}: {} train / {} test records", tr.len(), te.len());
        let (checkpoint, report, predictions) = run_window(&tr, &te, mode, &cfg)?;
        out.push(WindowResult {
            split: split.clone(),
            checkpoint,
            report,
            predictions,
        });
    }
    Ok(out)
}
