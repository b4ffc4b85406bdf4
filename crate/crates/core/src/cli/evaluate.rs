use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_csv, write_csv, Context, ImportanceRow};
use crate::comovement::{analyze, edge_list, mentions, summarize, write_edges_csv, write_entities_csv, write_leave_one_out_csv, write_summary_csv};
use crate::econometrics::{
    default_control_windows, delayed_series, factor_alpha, fama_macbeth, panel_from_returns, performance, read_factors_csv,
    FactorRow, SignalFileRow, SignalPanel,
};
use crate::error::{Error, Result};
use crate::event_model::read_panel_records;
use crate::model::Prediction;
use crate::seeds;
use crate::topics::{assign_topic, lda_gibbs, topic_importance, write_topic_report, Corpus, TopicLabel, MIN_CORPUS_FREQ};

fn signal_panel(ctx: &Context) -> Result<(SignalPanel, Vec<String>)> {
    let path = ctx.input(&ctx.cfg.paths.predictions, "predictions.csv", "predictions")?;
    let preds: Vec<Prediction> = read_csv(&path)?;
    let signals: Vec<SignalFileRow> =
        preds.iter().map(|p| SignalFileRow { date: p.date, stock_id: p.stock_id, signal: p.prediction }).collect();
    let windows = ctx.cfg.evaluation.control_windows.clone().unwrap_or_else(|| default_control_windows(ctx.cfg.mode));
    panel_from_returns(&signals, &ctx.returns()?, &windows)
}

#[derive(Debug, Serialize)]
struct PerformanceRow {
    delay: usize,
    periods: usize,
    mean: f64,
    ar: f64,
    t_stat: Option<f64>,
    sharpe: Option<f64>,
    alpha: Option<f64>,
    alpha_t: Option<f64>,
}

#[derive(Debug, Serialize)]
struct LongShortRow {
    date: chrono::NaiveDate,
    long_short: f64,
}

#[derive(Debug, Serialize)]
pub struct SortSummary {
    pub periods: usize,
    pub performance: Vec<serde_json::Value>,
    pub warnings: Vec<String>,
}

pub fn sort(ctx: &Context) -> Result<SortSummary> {
    let (panel, mut warnings) = signal_panel(ctx)?;
    let factors: Option<Vec<FactorRow>> =
        ctx.optional_input(&ctx.cfg.paths.factors, "factors.csv").map(|p| read_factors_csv(&p)).transpose()?;
    let mut rows = Vec::new();
    for &k in &ctx.cfg.evaluation.delays {
        let (series, w) = delayed_series(&panel, k, ctx.cfg.mode.periods_per_year())?;
        warnings.extend(w.into_iter().map(|m| format!("k={k}: {m}")));
        write_csv(
            &ctx.out.join(format!("long_short_k{k}.csv")),
            series.dates.iter().zip(&series.returns).map(|(&date, &long_short)| LongShortRow { date, long_short }),
        )?;
        let rf: Option<Vec<f64>> = factors.as_ref().and_then(|f| {
            let by_date: BTreeMap<_, _> = f.iter().map(|r| (r.date, r.rf)).collect();
            series.dates.iter().map(|d| by_date.get(d).copied()).collect()
        });
        let perf = performance(&series, rf.as_deref())?;
        let alpha = match &factors {
            Some(f) => match factor_alpha(&series, f) {
                Ok(a) => Some(a),
                Err(e) => {
                    warnings.push(format!("k={k}: factor alpha unavailable: {e}"));
                    None
                }
            },
            None => None,
        };
        rows.push(PerformanceRow {
            delay: k,
            periods: perf.periods,
            mean: perf.mean,
            ar: perf.ar,
            t_stat: perf.t_stat,
            sharpe: perf.sharpe,
            alpha: alpha.as_ref().map(|a| a.alpha),
            alpha_t: alpha.as_ref().and_then(|a| a.t_stat),
        });
    }
    write_csv(&ctx.out.join("performance.csv"), &rows)?;
    Ok(SortSummary {
        periods: panel.len(),
        performance: rows.iter().map(serde_json::to_value).collect::<std::result::Result<_, _>>()?,
        warnings,
    })
}

#[derive(Debug, Serialize)]
struct FmRow<'a> {
    name: &'a str,
    mean: f64,
    se: f64,
    t_stat: Option<f64>,
    periods: usize,
}

pub fn fmb(ctx: &Context) -> Result<crate::econometrics::FmResult> {
    let (panel, warnings) = signal_panel(ctx)?;
    let ev = &ctx.cfg.evaluation;
    let mut res = fama_macbeth(&panel, ev.standardize, ev.nw_lags)?;
    res.warnings.splice(0..0, warnings);
    write_csv(
        &ctx.out.join("fmb.csv"),
        res.coefficients.iter().map(|c| FmRow { name: &c.name, mean: c.mean, se: c.se, t_stat: c.t_stat, periods: c.periods }),
    )?;
    Ok(res)
}

#[derive(Debug, Deserialize)]
struct RankingRow {
    feature: String,
    imp_score: f64,
}

#[derive(Debug, Serialize)]
pub struct ComoveSummary {
    pub focal: usize,
    pub analyzed: usize,
    pub excluded: Vec<(String, String)>,
    pub groups: Vec<crate::comovement::GroupSummaryRow>,
    pub warnings: Vec<String>,
}

pub fn comove(ctx: &Context, ranking: Option<&Path>) -> Result<ComoveSummary> {
    let ranking = match ranking {
        Some(p) => p.to_path_buf(),
        None => ctx.input(&None, "ranking_entity.csv", "entity ranking")?,
    };
    let focal: Vec<(String, f64)> = read_csv::<RankingRow>(&ranking)?.into_iter().map(|r| (r.feature, r.imp_score)).collect();
    let records = read_panel_records(&ctx.input(&ctx.cfg.paths.panel, "panel.jsonl", "panel")?)?;
    let table = crate::econometrics::ReturnTable::from_rows(&ctx.daily_returns()?)?;
    let report = analyze(&focal, &mentions(&records), &table, &ctx.cfg.comovement)?;
    let groups = summarize(&report);
    write_summary_csv(&ctx.out.join("comove_groups.csv"), &groups)?;
    write_entities_csv(&ctx.out.join("comove_entities.csv"), &report)?;
    write_leave_one_out_csv(&ctx.out.join("comove_leave_one_out.csv"), &report)?;
    if let Some(top) = report.entities.first() {
        write_edges_csv(&ctx.out.join("comove_edges.csv"), &edge_list(&top.entity, &top.portfolio, &records))?;
    }
    Ok(ComoveSummary {
        focal: focal.len(),
        analyzed: report.entities.len(),
        excluded: report.excluded,
        groups,
        warnings: report.warnings,
    })
}

#[derive(Debug, Serialize)]
struct TopicTermsRow {
    topic: usize,
    terms: String,
}

#[derive(Debug, Serialize)]
pub struct TopicsSummary {
    pub documents: usize,
    pub vocabulary: usize,
    pub tokens: usize,
    pub k: usize,
    pub unassigned: usize,
    /// (topic, imp_score, top terms) of the leading topics.
    pub top: Vec<(String, f64, String)>,
}

pub fn topics(ctx: &Context, importance: Option<&Path>) -> Result<TopicsSummary> {
    let path = match importance {
        Some(p) => p.to_path_buf(),
        None => ctx.input(&None, "importance_event.csv", "event importance")?,
    };
    let rows: Vec<ImportanceRow> = ImportanceRow::read(&path)?.into_iter().filter(|r| r.role == "event").collect();
    if rows.is_empty() {
        return Err(Error::Insufficient(format!("{} holds no event-level rows", path.display())));
    }
    let mut seen = BTreeSet::new();
    let texts: Vec<&str> = rows.iter().map(|r| r.context.as_str()).filter(|c| seen.insert(*c)).collect();
    let corpus = Corpus::build(&texts, MIN_CORPUS_FREQ)?;
    let t = &ctx.cfg.topics;
    let model = lda_gibbs(&corpus, t.k, t.alpha, Some(t.beta), t.iterations, seeds::derive(ctx.cfg.seed, "topics"))?;
    let labels: BTreeMap<&str, TopicLabel> = texts.iter().map(|c| (*c, assign_topic(c, &model))).collect();
    let aggs = topic_importance(rows.iter().map(|r| (labels[r.context.as_str()], r.score)), ctx.cfg.evaluation.reduction)?;
    write_topic_report(&ctx.out.join("topics.csv"), &aggs, &model, t.top_terms)?;
    write_csv(
        &ctx.out.join("topic_terms.csv"),
        (0..model.k).map(|topic| TopicTermsRow { topic, terms: model.top_terms(topic, t.top_terms).join(" ") }),
    )?;
    let terms = |l: TopicLabel| match l {
        TopicLabel::Topic(k) => model.top_terms(k, 5).join(" "),
        TopicLabel::Unassigned => String::new(),
    };
    Ok(TopicsSummary {
        documents: texts.len(),
        vocabulary: corpus.vocab.len(),
        tokens: corpus.n_tokens(),
        k: model.k,
        unassigned: labels.values().filter(|l| **l == TopicLabel::Unassigned).count(),
        top: aggs.iter().take(10).map(|a| (a.feature.to_string(), a.abs_importance, terms(a.feature))).collect(),
    })
}
