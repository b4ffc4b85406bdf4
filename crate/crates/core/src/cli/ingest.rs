use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_jsonl, week_start, write_jsonl, Context};
use crate::error::{Error, Result};
use crate::event_model::{dedupe_articles, term_frequencies, write_panel_records, EventRecord, EventTriplet, Mode, PanelRecord};
use crate::extraction::{extract_with_retry, FewShot, HttpProvider, Provider, ReplayProvider, Status};
use crate::synth::{generate, SynthManifest, SynthSpec};

/// One line of the articles file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub date: NaiveDate,
    pub stock_id: i64,
    pub text: String,
}

/// One line of the extraction output; the text is kept for deduplication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedArticle {
    pub id: String,
    pub date: NaiveDate,
    pub stock_id: i64,
    pub text: String,
    pub status: Status,
    pub attempts: usize,
    pub events: Vec<EventTriplet>,
    pub diagnostics: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ExtractSummary {
    pub articles: usize,
    pub ok: usize,
    pub discarded: usize,
    pub events: usize,
    pub attempts: usize,
    pub output: String,
}

pub fn extract(ctx: &Context) -> Result<ExtractSummary> {
    let paths = &ctx.cfg.paths;
    let articles: Vec<Article> = read_jsonl(&ctx.input(&paths.articles, "articles.jsonl", "articles")?)?;
    let examples: Vec<FewShot> = match &paths.few_shot {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => Vec::new(),
    };
    let provider: Box<dyn Provider> = match &paths.replay {
        Some(p) => Box::new(ReplayProvider::load(p)?),
        None if articles.is_empty() => Box::new(ReplayProvider::default()),
        None => Box::new(HttpProvider::from_env(ctx.cfg.extraction.http.clone())?),
    };
    let max_attempts = ctx.cfg.extraction.max_attempts;
    let out: Vec<ExtractedArticle> = articles
        .par_iter()
        .map(|a| {
            let outcome = extract_with_retry(&a.text, a.date, &examples, provider.as_ref(), max_attempts);
            let (status, attempts, events, diagnostics, warnings) = match outcome {
                Ok(o) => (o.status, o.attempts, o.events, o.diagnostics, o.warnings),
                Err(e) => (Status::Discarded, 0, Vec::new(), vec![e.to_string()], Vec::new()),
            };
            if status == Status::Discarded {
                log::warn!("article {} discarded: {}", a.id, diagnostics.last().map_or("", String::as_str));
            }
            ExtractedArticle {
                id: a.id.clone(),
                date: a.date,
                stock_id: a.stock_id,
                text: a.text.clone(),
                status,
                attempts,
                events,
                diagnostics,
                warnings,
            }
        })
        .collect();
    let path = ctx.output(&paths.extracted, "extracted.jsonl");
    write_jsonl(&path, &out)?;
    let ok = out.iter().filter(|a| a.status == Status::Ok).count();
    Ok(ExtractSummary {
        articles: out.len(),
        ok,
        discarded: out.len() - ok,
        events: out.iter().map(|a| a.events.len()).sum(),
        attempts: out.iter().map(|a| a.attempts).sum(),
        output: path.display().to_string(),
    })
}

pub fn synth(ctx: &Context, spec_path: Option<&Path>) -> Result<SynthManifest> {
    let mut spec: SynthSpec = match spec_path {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Invalid(format!("synth spec: {e}")))?,
        None => SynthSpec::default(),
    };
    spec.mode = ctx.cfg.mode;
    spec.seed = ctx.cfg.seed;
    let data = generate(&spec)?;
    data.write(&ctx.out)?;
    Ok(data.manifest)
}

#[derive(Debug, Default, Serialize)]
pub struct BuildSummary {
    pub articles: usize,
    pub discarded: usize,
    pub before_calendar: usize,
    pub missing_return: usize,
    pub duplicates: usize,
    pub records: usize,
    pub events: usize,
    pub output: String,
}

/// Period label and (weekly) trading-day index for a news date. Daily news
/// on a non-trading date joins the preceding session.
fn period_of(date: NaiveDate, calendar: &[NaiveDate], mode: Mode) -> Option<(NaiveDate, Option<u8>)> {
    match mode {
        Mode::Daily => {
            let i = calendar.partition_point(|d| *d <= date);
            (i > 0).then(|| (calendar[i - 1], None))
        }
        Mode::Weekly => {
            let day = date.weekday().num_days_from_monday().min(4) as u8 + 1;
            Some((week_start(date), Some(day)))
        }
    }
}

pub fn build(ctx: &Context) -> Result<BuildSummary> {
    let paths = &ctx.cfg.paths;
    let extracted: Vec<ExtractedArticle> = read_jsonl(&ctx.input(&paths.extracted, "extracted.jsonl", "extracted articles")?)?;
    let table = ctx.returns()?;
    let mut s = BuildSummary { articles: extracted.len(), ..Default::default() };
    let mut groups: BTreeMap<(NaiveDate, i64), (f64, Vec<(&ExtractedArticle, Option<u8>)>)> = BTreeMap::new();
    for a in &extracted {
        if a.status != Status::Ok {
            s.discarded += 1;
            continue;
        }
        let Some((label, day)) = period_of(a.date, &table.calendar, ctx.cfg.mode) else {
            s.before_calendar += 1;
            continue;
        };
        let Some(target) = table.next_index(label).and_then(|j| table.by_date[j].get(&a.stock_id)) else {
            s.missing_return += 1;
            continue;
        };
        groups.entry((label, a.stock_id)).or_insert_with(|| (*target, Vec::new())).1.push((a, day));
    }
    let mut records = Vec::with_capacity(groups.len());
    for ((date, stock_id), (target_return, arts)) in groups {
        let tf: Vec<_> = arts.iter().map(|(a, _)| term_frequencies(&a.text)).collect();
        let kept = dedupe_articles(&tf, ctx.cfg.extraction.dedupe_threshold)?;
        s.duplicates += arts.len() - kept.len();
        let events: Vec<EventRecord> = kept
            .iter()
            .flat_map(|&i| {
                let (a, day) = arts[i];
                a.events.iter().map(move |t| EventRecord { triplet: t.clone(), day })
            })
            .collect();
        if events.is_empty() {
            continue;
        }
        s.events += events.len();
        records.push(PanelRecord { stock_id, date, events, target_return });
    }
    let path = ctx.output(&paths.panel, "panel.jsonl");
    write_panel_records(&path, &records)?;
    s.records = records.len();
    s.output = path.display().to_string();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekend_news_joins_friday_session() {
        let d = |day| NaiveDate::from_ymd_opt(2024, 1, day).unwrap();
        let cal = [d(4), d(5), d(8)];
        assert_eq!(period_of(d(6), &cal, Mode::Daily), Some((d(5), None)));
        assert_eq!(period_of(d(8), &cal, Mode::Daily), Some((d(8), None)));
        assert_eq!(period_of(d(3), &cal, Mode::Daily), None);
        assert_eq!(period_of(d(7), &cal, Mode::Weekly), Some((d(1), Some(5))));
        assert_eq!(period_of(d(2), &cal, Mode::Weekly), Some((d(1), Some(2))));
    }
}
