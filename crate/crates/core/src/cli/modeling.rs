use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{read_csv, write_csv, Context};
use crate::attribution::{aggregate, attribute_all, polarity_table, write_polarity_csv, write_ranking_csv, Direction, Feature, Level, Role};
use crate::config::SplitConfig;
use crate::error::{Error, Result};
use crate::event_model::{encode_records, read_panel_records, rolling_splits, FirmPeriodObservation, ObservationConfig, Panel, PanelRecord, Split};
use crate::model::{predict_panel, walk_forward, Checkpoint, Prediction};
use crate::seeds;

/// One line of `windows.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub split: Split,
    /// File name inside the checkpoint directory.
    pub checkpoint: String,
}

/// One chronological split of the distinct period dates.
fn fraction_split(calendar: &[NaiveDate], train_fraction: f64) -> Result<Split> {
    let n = calendar.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Insufficient(format!("{n} periods cannot be split at fraction {train_fraction}")));
    }
    let (a, b, c, d) = (calendar[0], calendar[n_train - 1], calendar[n_train], calendar[n - 1]);
    Ok(Split { index: 0, train_years: a.year()..=b.year(), test_years: c.year()..=d.year(), train: a..=b, test: c..=d })
}

fn load_records(ctx: &Context) -> Result<Vec<PanelRecord>> {
    read_panel_records(&ctx.input(&ctx.cfg.paths.panel, "panel.jsonl", "panel")?)
}

fn checkpoint_dir(ctx: &Context) -> std::path::PathBuf {
    ctx.output(&ctx.cfg.paths.checkpoints, "checkpoints")
}

#[derive(Debug, Serialize)]
pub struct WindowSummary {
    pub index: usize,
    pub train: (NaiveDate, NaiveDate),
    pub test: (NaiveDate, NaiveDate),
    pub seed: u64,
    pub train_observations: usize,
    pub first_epoch_mse: Option<f64>,
    pub last_epoch_mse: Option<f64>,
    pub checkpoint: String,
}

pub fn train(ctx: &Context) -> Result<Vec<WindowSummary>> {
    let records = load_records(ctx)?;
    let mut calendar: Vec<NaiveDate> = records.iter().map(|r| r.date).collect();
    calendar.sort();
    calendar.dedup();
    let splits = match &ctx.cfg.split {
        SplitConfig::Fraction { train_fraction } => vec![fraction_split(&calendar, *train_fraction)?],
        SplitConfig::Rolling(spec) => rolling_splits(&calendar, spec)?,
    };
    let mut base = ctx.cfg.model.clone();
    base.seed = seeds::derive(ctx.cfg.seed, "model");
    let results = walk_forward(&records, &splits, ctx.cfg.mode, &base, &ctx.cfg.presets)?;
    let dir = checkpoint_dir(ctx);
    std::fs::create_dir_all(&dir)?;
    let mut entries = Vec::new();
    let mut summary = Vec::new();
    for w in results {
        let name = format!("window-{:02}.json", w.split.index + 1);
        w.checkpoint.save(&dir.join(&name))?;
        summary.push(WindowSummary {
            index: w.split.index + 1,
            train: (*w.split.train.start(), *w.split.train.end()),
            test: (*w.split.test.start(), *w.split.test.end()),
            seed: w.report.seed,
            train_observations: records.iter().filter(|r| w.split.train.contains(&r.date)).count(),
            first_epoch_mse: w.report.epoch_mse.first().copied(),
            last_epoch_mse: w.report.epoch_mse.last().copied(),
            checkpoint: name.clone(),
        });
        entries.push(WindowEntry { split: w.split, checkpoint: name });
    }
    std::fs::write(dir.join("windows.json"), serde_json::to_string_pretty(&entries)?)?;
    Ok(summary)
}

/// Each window's checkpoint with its test span encoded against the window's
/// vocabulary.
fn test_panels(ctx: &Context) -> Result<Vec<(WindowEntry, Checkpoint, Panel)>> {
    let records = load_records(ctx)?;
    let dir = checkpoint_dir(ctx);
    let manifest = dir.join("windows.json");
    if !manifest.exists() {
        return Err(Error::Invalid(format!("{} does not exist; run `train` first", manifest.display())));
    }
    let entries: Vec<WindowEntry> = serde_json::from_str(&std::fs::read_to_string(manifest)?)?;
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let ckpt = Checkpoint::load(&dir.join(&e.checkpoint))?;
        if ckpt.mode != ctx.cfg.mode {
            return Err(Error::Invalid(format!("checkpoint {} was trained in {:?} mode", e.checkpoint, ckpt.mode)));
        }
        let test: Vec<PanelRecord> = e.split.apply_records(&records).1.into_iter().cloned().collect();
        let obs_cfg = ObservationConfig { max_events: ckpt.config.max_events, days_per_week: ckpt.config.days_per_week };
        let (panel, _) = encode_records(&test, ckpt.mode, &obs_cfg, &mut ckpt.vocab.clone(), false)?;
        out.push((e, ckpt, panel));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct PredictSummary {
    pub windows: Vec<(usize, usize, Option<f64>)>,
    pub predictions: usize,
    pub output: String,
}

pub fn predict(ctx: &Context) -> Result<PredictSummary> {
    let mut all: Vec<Prediction> = Vec::new();
    let mut windows = Vec::new();
    for (e, ckpt, panel) in test_panels(ctx)? {
        let preds = predict_panel(&panel, &ckpt)?;
        let mse = (!preds.is_empty())
            .then(|| preds.iter().map(|p| (p.prediction - p.realized).powi(2)).sum::<f64>() / preds.len() as f64);
        windows.push((e.split.index + 1, preds.len(), mse));
        all.extend(preds);
    }
    let path = ctx.output(&ctx.cfg.paths.predictions, "predictions.csv");
    write_csv(&path, &all)?;
    Ok(PredictSummary { windows, predictions: all.len(), output: path.display().to_string() })
}

/// One attributed feature occurrence, with the context of its event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub window: usize,
    pub date: NaiveDate,
    pub stock_id: i64,
    pub day: usize,
    pub slot: usize,
    /// event, subject or object.
    pub role: String,
    pub feature: String,
    pub score: f64,
    pub context: String,
}

impl ImportanceRow {
    pub fn read(path: &std::path::Path) -> Result<Vec<Self>> {
        read_csv(path)
    }
}

#[derive(Debug, Serialize)]
pub struct AttributeSummary {
    pub level: Level,
    pub occurrences: usize,
    pub ranked_features: usize,
    pub min_freq: usize,
    /// (feature, imp_score, pos_pct) of the leading features.
    pub top: Vec<(String, f64, f64)>,
}

pub fn attribute(ctx: &Context, level: Level) -> Result<AttributeSummary> {
    let ev = &ctx.cfg.evaluation;
    let mut rows = Vec::new();
    for (e, ckpt, panel) in test_panels(ctx)? {
        let mut obs: Vec<&FirmPeriodObservation> = panel.observations().collect();
        obs.sort_by_key(|o| (o.period, o.stock_id));
        let by_key: BTreeMap<(NaiveDate, i64), &FirmPeriodObservation> = obs.iter().map(|o| ((o.period, o.stock_id), *o)).collect();
        for r in attribute_all(&obs, &ckpt.params, ckpt.mode, level)? {
            let context = by_key
                .get(&(r.period, r.stock_id))
                .and_then(|o| o.contexts.get(r.day)?.get(r.slot))
                .cloned()
                .unwrap_or_default();
            let role = match r.feature {
                Feature::Event(_) => "event",
                Feature::Entity { role: Role::Subject, .. } => "subject",
                Feature::Entity { role: Role::Object, .. } => "object",
            };
            rows.push(ImportanceRow {
                window: e.split.index + 1,
                date: r.period,
                stock_id: r.stock_id,
                day: r.day,
                slot: r.slot,
                role: role.into(),
                feature: r.feature.key(&ckpt.vocab),
                score: r.score,
                context,
            });
        }
    }
    let tag = match level {
        Level::Event => "event",
        Level::Entity => "entity",
    };
    write_csv(&ctx.out.join(format!("importance_{tag}.csv")), &rows)?;
    let min_freq = match level {
        Level::Event => ev.min_freq_events,
        Level::Entity => ev.min_freq_entities,
    };
    let aggs = aggregate(rows.iter().map(|r| (r.feature.clone(), r.score)), min_freq, ev.reduction)?;
    write_ranking_csv(&ctx.out.join(format!("ranking_{tag}.csv")), &aggs)?;
    for (dir, name) in [(Direction::Positive, "positive"), (Direction::Negative, "negative")] {
        write_polarity_csv(&ctx.out.join(format!("polarity_{tag}_{name}.csv")), &polarity_table(&aggs, ev.top_n, dir))?;
    }
    Ok(AttributeSummary {
        level,
        occurrences: rows.len(),
        ranked_features: aggs.len(),
        min_freq,
        top: aggs.iter().take(10).map(|a| (a.feature.clone(), a.abs_importance, a.pos_pct)).collect(),
    })
}
