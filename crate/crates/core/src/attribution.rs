//! Gradient×input importance of events and entities, and its aggregation
//! into absolute and polarity rankings.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::event_model::{CanonicalEvent, EntityId, FirmPeriodObservation, Mode, Vocabulary};
use crate::model::{ForwardOptions, Graph, ModelParams};

/// Full-scale frequency floors for events and entities.
pub const FULL_SCALE_MIN_FREQ_EVENTS: usize = 20;
pub const FULL_SCALE_MIN_FREQ_ENTITIES: usize = 700;
/// Desk-scale defaults.
pub const DESK_MIN_FREQ_EVENTS: usize = 2;
pub const DESK_MIN_FREQ_ENTITIES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Event,
    Entity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Subject,
    Object,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Event(CanonicalEvent),
    Entity { id: EntityId, role: Role },
}

impl Feature {
    /// Human-readable aggregation key. Entity keys ignore the role.
    pub fn key(&self, vocab: &Vocabulary) -> String {
        match self {
            Feature::Event(e) => vocab.describe(e),
            Feature::Entity { id, .. } => vocab.entities.key(id.0).unwrap_or("?").to_string(),
        }
    }
}

/// One signed attribution for a feature occurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRecord {
    pub feature: Feature,
    pub stock_id: i64,
    pub period: NaiveDate,
    /// Day slot (0 in daily mode) and event slot of the occurrence.
    pub day: usize,
    pub slot: usize,
    pub score: f64,
}

/// Attributions for one observation, including the non-event inputs so that
/// contributions can be reconciled with the prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalAttribution {
    pub prediction: f64,
    pub records: Vec<ImportanceRecord>,
    pub cls_daily: f64,
    pub cls_weekly: f64,
    pub stock: f64,
}

fn row_scores(tape: &Tape, g: &Gradients, v: Var) -> Vec<f64> {
    let x = tape.value(v);
    let gx = g.wrt(tape, v);
    (0..x.rows())
        .map(|r| x.row(r).iter().zip(gx.row(r)).map(|(a, b)| a * b).sum())
        .collect()
}

fn total_score(tape: &Tape, g: &Gradients, v: Var) -> f64 {
    row_scores(tape, g, v).iter().sum()
}

/// Σ over embedding dimensions of input ⊙ ∂ŷ/∂input, per feature occurrence.
/// Event level scores the composed event vector; entity level scores the
/// subject and object lookups separately. PAD slots produce no records.
pub fn local_importance(obs: &FirmPeriodObservation, params: &ModelParams, mode: Mode, level: Level) -> Result<LocalAttribution> {
    let graph = Graph::build(params, obs, mode, ForwardOptions { compact: true })?;
    let tape = &graph.tape;
    let g = tape.backward(graph.trace.output)?;
    let mut records = Vec::new();
    for (d, day) in graph.trace.days.iter().enumerate() {
        let Some(ev) = &day.events else { continue };
        let slice = &obs.days[d];
        let mut push = |feature: Feature, slot: usize, score: f64| {
            records.push(ImportanceRecord {
                feature,
                stock_id: obs.stock_id,
                period: obs.period,
                day: d,
                slot,
                score,
            })
        };
        match level {
            Level::Event => {
                for (&slot, s) in ev.slots.iter().zip(row_scores(tape, &g, ev.events)) {
                    push(Feature::Event(slice.events[slot]), slot, s);
                }
            }
            Level::Entity => {
                let subj = row_scores(tape, &g, ev.subject);
                let obj = row_scores(tape, &g, ev.object);
                for (i, &slot) in ev.slots.iter().enumerate() {
                    let e = slice.events[slot];
                    push(Feature::Entity { id: e.subject, role: Role::Subject }, slot, subj[i]);
                    push(Feature::Entity { id: e.object, role: Role::Object }, slot, obj[i]);
                }
            }
        }
    }
    if let Some(r) = records.iter().find(|r| !r.score.is_finite()) {
        return Err(Error::Domain(format!("non-finite attribution for stock {} on {}", r.stock_id, r.period)));
    }
    Ok(LocalAttribution {
        prediction: graph.prediction(),
        records,
        cls_daily: total_score(tape, &g, graph.leaves.cls_daily),
        cls_weekly: if mode == Mode::Weekly { total_score(tape, &g, graph.leaves.cls_weekly) } else { 0.0 },
        stock: total_score(tape, &g, graph.trace.stock),
    })
}

/// Local importances for many observations, concatenated in input order.
pub fn attribute_all(observations: &[&FirmPeriodObservation], params: &ModelParams, mode: Mode, level: Level) -> Result<Vec<ImportanceRecord>> {
    let per: Vec<Result<LocalAttribution>> = observations
        .par_iter()
        .map(|o| local_importance(o, params, mode, level))
        .collect();
    let mut out = Vec::new();
    for p in per {
        out.extend(p?.records);
    }
    Ok(out)
}

/// How per-occurrence magnitudes are reduced within a feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateImportance<K = String> {
    pub feature: K,
    /// Mean (or sum) of |score|.
    pub abs_importance: f64,
    /// Share of Σ|score| contributed by positive scores; 0.5 when Σ|score| = 0.
    pub pos_pct: f64,
    pub neg_pct: f64,
    pub signed_mean: f64,
    pub freq: usize,
}

#[derive(Default)]
struct Acc {
    pos: f64,
    neg: f64,
    signed: f64,
    n: usize,
}

/// Groups `(key, score)` pairs, drops keys seen fewer than `min_freq` times,
/// and ranks by absolute importance (descending, ties by key).
pub fn aggregate<K: Ord>(items: impl IntoIterator<Item = (K, f64)>, min_freq: usize, reduction: Reduction) -> Result<Vec<AggregateImportance<K>>> {
    if min_freq == 0 {
        return Err(Error::Invalid("min_freq must be at least 1".into()));
    }
    let mut groups: BTreeMap<K, Acc> = BTreeMap::new();
    for (k, s) in items {
        let a = groups.entry(k).or_default();
        if s > 0.0 {
            a.pos += s;
        } else {
            a.neg -= s;
        }
        a.signed += s;
        a.n += 1;
    }
    let mut out: Vec<AggregateImportance<K>> = groups
        .into_iter()
        .filter(|(_, a)| a.n >= min_freq)
        .map(|(feature, a)| {
            let mass = a.pos + a.neg;
            let pos_pct = if mass > 0.0 { a.pos / mass } else { 0.5 };
            AggregateImportance {
                feature,
                abs_importance: match reduction {
                    Reduction::Mean => mass / a.n as f64,
                    Reduction::Sum => mass,
                },
                pos_pct,
                neg_pct: 1.0 - pos_pct,
                signed_mean: a.signed / a.n as f64,
                freq: a.n,
            }
        })
        .collect();
    out.sort_by(|a, b| b.abs_importance.total_cmp(&a.abs_importance).then_with(|| a.feature.cmp(&b.feature)));
    Ok(out)
}

/// Aggregates records by their vocabulary key.
pub fn aggregate_records(records: &[ImportanceRecord], vocab: &Vocabulary, min_freq: usize, reduction: Reduction) -> Result<Vec<AggregateImportance>> {
    aggregate(records.iter().map(|r| (r.feature.key(vocab), r.score)), min_freq, reduction)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarityRow {
    pub rank: usize,
    pub feature: String,
    pub signed_mean: f64,
    pub imp_score: f64,
    pub pos_pct: f64,
    pub neg_pct: f64,
    pub freq: usize,
}

/// Top `top_n` features by signed mean in the given direction. Features with
/// a signed mean of exactly zero appear in neither table.
pub fn polarity_table(aggregates: &[AggregateImportance], top_n: usize, direction: Direction) -> Vec<PolarityRow> {
    let mut rows: Vec<&AggregateImportance> = aggregates
        .iter()
        .filter(|a| match direction {
            Direction::Positive => a.signed_mean > 0.0,
            Direction::Negative => a.signed_mean < 0.0,
        })
        .collect();
    rows.sort_by(|a, b| {
        let ord = match direction {
            Direction::Positive => b.signed_mean.total_cmp(&a.signed_mean),
            Direction::Negative => a.signed_mean.total_cmp(&b.signed_mean),
        };
        ord.then_with(|| a.feature.cmp(&b.feature))
    });
    rows.into_iter()
        .take(top_n)
        .enumerate()
        .map(|(i, a)| PolarityRow {
            rank: i + 1,
            feature: a.feature.clone(),
            signed_mean: a.signed_mean,
            imp_score: a.abs_importance,
            pos_pct: a.pos_pct,
            neg_pct: a.neg_pct,
            freq: a.freq,
        })
        .collect()
}

#[derive(Serialize)]
struct RankRow<'a> {
    rank: usize,
    feature: &'a str,
    imp_score: f64,
    pos_pct: f64,
    neg_pct: f64,
    freq: usize,
}

/// rank, feature, imp_score, pos_pct, neg_pct, freq
pub fn write_ranking_csv(path: &Path, rows: &[AggregateImportance]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, a) in rows.iter().enumerate() {
        w.serialize(RankRow {
            rank: i + 1,
            feature: &a.feature,
            imp_score: a.abs_importance,
            pos_pct: a.pos_pct,
            neg_pct: a.neg_pct,
            freq: a.freq,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_polarity_csv(path: &Path, rows: &[PolarityRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RecordRow<'a> {
    date: NaiveDate,
    stock_id: i64,
    day: usize,
    slot: usize,
    role: &'a str,
    feature: String,
    score: f64,
}

/// One line per occurrence: date, stock_id, day, slot, role, feature, score.
pub fn write_records_csv(path: &Path, records: &[ImportanceRecord], vocab: &Vocabulary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        let role = match r.feature {
            Feature::Event(_) => "event",
            Feature::Entity { role: Role::Subject, .. } => "subject",
            Feature::Entity { role: Role::Object, .. } => "object",
        };
        w.serialize(RecordRow {
            date: r.period,
            stock_id: r.stock_id,
            day: r.day,
            slot: r.slot,
            role,
            feature: r.feature.key(vocab),
            score: r.score,
        })?;
    }
    w.flush()?;
    Ok(())
}
