use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::io::PanelRecord;
use super::processing::dedupe_events;
use super::vocab::{CanonicalEvent, StockIndex, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Daily,
    Weekly,
}

impl Mode {
    pub fn periods_per_year(self) -> f64 {
        match self {
            Mode::Daily => 252.0,
            Mode::Weekly => 52.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationConfig {
    pub max_events: usize,
    pub days_per_week: usize,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            max_events: 30,
            days_per_week: 5,
        }
    }
}

/// Fixed-width event slots for one trading day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaySlice {
    /// Exactly `max_events` slots; PAD triplets after the real ones.
    pub events: Vec<CanonicalEvent>,
    pub mask: Vec<bool>,
}

impl DaySlice {
    pub fn empty(max_events: usize) -> Self {
        Self {
            events: vec![CanonicalEvent::PAD; max_events],
            mask: vec![false; max_events],
        }
    }

    pub fn n_real(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn real_events(&self) -> impl Iterator<Item = (usize, &CanonicalEvent)> {
        self.events.iter().enumerate().filter(move |(i, _)| self.mask[*i])
    }
}

/// A stock's events for one period and its next-period realized return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirmPeriodObservation {
    pub stock_id: i64,
    pub stock: StockIndex,
    pub period: NaiveDate,
    /// One slice in daily mode; `days_per_week` slices in weekly mode, where
    /// slot `d` holds trading day `d + 1` of the week.
    pub days: Vec<DaySlice>,
    /// Context sentence per real slot, aligned with `days[d].events`.
    pub contexts: Vec<Vec<String>>,
    /// Fraction, not percent.
    pub target_return: f64,
}

impl FirmPeriodObservation {
    pub fn n_events(&self) -> usize {
        self.days.iter().map(DaySlice::n_real).sum()
    }
}

/// Observations grouped by period.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub mode: Mode,
    periods: BTreeMap<NaiveDate, Vec<FirmPeriodObservation>>,
}

impl Panel {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            periods: BTreeMap::new(),
        }
    }

    /// Adds an observation; a second observation for the same stock in the same
    /// period is rejected.
    pub fn push(&mut self, obs: FirmPeriodObservation) -> Result<()> {
        let slot = self.periods.entry(obs.period).or_default();
        if slot.iter().any(|o| o.stock_id == obs.stock_id) {
            return Err(Error::Invalid(format!(
                "duplicate observation for stock {} in period {}",
                obs.stock_id, obs.period
            )));
        }
        slot.push(obs);
        Ok(())
    }

    pub fn calendar(&self) -> Vec<NaiveDate> {
        self.periods.keys().copied().collect()
    }

    pub fn periods(&self) -> impl Iterator<Item = (&NaiveDate, &Vec<FirmPeriodObservation>)> {
        self.periods.iter()
    }

    pub fn observations(&self) -> impl Iterator<Item = &FirmPeriodObservation> {
        self.periods.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.periods.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Observations whose period falls in `range`.
    pub fn subset(&self, range: &RangeInclusive<NaiveDate>) -> Panel {
        Panel {
            mode: self.mode,
            periods: self
                .periods
                .range(range.clone())
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }
}

fn build_day(raw: &[(CanonicalEvent, &str)], max_events: usize) -> (DaySlice, Vec<String>) {
    let events: Vec<_> = raw.iter().map(|(e, _)| *e).collect();
    let kept = dedupe_events(&events);
    let mut contexts = Vec::with_capacity(kept.len().min(max_events));
    for e in kept.iter().take(max_events) {
        let ctx = raw.iter().find(|(r, _)| r == e).map(|(_, c)| c.to_string()).unwrap_or_default();
        contexts.push(ctx);
    }
    let slice = super::processing::build_observation(&events, &ObservationConfig { max_events, days_per_week: 1 });
    (slice, contexts)
}

/// Turns text-level records into a panel. With `grow` the vocabulary absorbs
/// new entities, actions and stocks (training data); without it unseen tokens
/// map to UNK (held-out data). Returns the panel and canonicalization warnings.
pub fn encode_records(
    records: &[PanelRecord],
    mode: Mode,
    cfg: &ObservationConfig,
    vocab: &mut Vocabulary,
    grow: bool,
) -> Result<(Panel, Vec<String>)> {
    let mut panel = Panel::new(mode);
    let mut warnings = Vec::new();
    let n_days = match mode {
        Mode::Daily => 1,
        Mode::Weekly => cfg.days_per_week,
    };
    for rec in records {
        if !(rec.target_return > -1.0) || !rec.target_return.is_finite() {
            return Err(Error::Domain(format!(
                "target return {} for stock {} on {} must be finite and > -1",
                rec.target_return, rec.stock_id, rec.date
            )));
        }
        let mut per_day: Vec<Vec<(CanonicalEvent, &str)>> = vec![Vec::new(); n_days];
        for ev in &rec.events {
            let day = match mode {
                Mode::Daily => 0,
                Mode::Weekly => {
                    let d = ev.day.unwrap_or(1) as usize;
                    if d == 0 || d > n_days {
                        return Err(Error::Invalid(format!("day index {d} outside 1..={n_days}")));
                    }
                    d - 1
                }
            };
            let canon = if grow {
                ev.triplet.canonicalize(vocab, &mut warnings)?
            } else {
                ev.triplet.lookup(vocab)
            };
            per_day[day].push((canon, ev.triplet.context.as_str()));
        }
        let stock = if grow { vocab.add_stock(rec.stock_id) } else { vocab.lookup_stock(rec.stock_id) };
        let (days, contexts) = per_day.iter().map(|raw| build_day(raw, cfg.max_events)).unzip();
        panel.push(FirmPeriodObservation {
            stock_id: rec.stock_id,
            stock,
            period: rec.date,
            days,
            contexts,
            target_return: rec.target_return,
        })?;
    }
    Ok((panel, warnings))
}

/// Rolling-window layout in calendar years.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingSpec {
    pub train_years: u32,
    pub test_years: u32,
    /// 1-based split number from which the training window stops sliding and
    /// instead widens (its start is frozen at the previous split's start).
    pub extend_from: Option<usize>,
}

impl Default for RollingSpec {
    fn default() -> Self {
        Self {
            train_years: 5,
            test_years: 1,
            extend_from: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub index: usize,
    pub train_years: RangeInclusive<i32>,
    pub test_years: RangeInclusive<i32>,
    pub train: RangeInclusive<NaiveDate>,
    pub test: RangeInclusive<NaiveDate>,
}

impl Split {
    pub fn apply(&self, panel: &Panel) -> (Panel, Panel) {
        (panel.subset(&self.train), panel.subset(&self.test))
    }

    pub fn apply_records<'a>(&self, records: &'a [PanelRecord]) -> (Vec<&'a PanelRecord>, Vec<&'a PanelRecord>) {
        let train = records.iter().filter(|r| self.train.contains(&r.date)).collect();
        let test = records.iter().filter(|r| self.test.contains(&r.date)).collect();
        (train, test)
    }
}

fn year_bounds(years: RangeInclusive<i32>) -> RangeInclusive<NaiveDate> {
    NaiveDate::from_ymd_opt(*years.start(), 1, 1).expect("valid year")
        ..=NaiveDate::from_ymd_opt(*years.end(), 12, 31).expect("valid year")
}

/// Sliding train/test windows over the calendar years spanned by `calendar`,
/// stepping one test span at a time.
pub fn rolling_splits(calendar: &[NaiveDate], spec: &RollingSpec) -> Result<Vec<Split>> {
    if spec.train_years == 0 || spec.test_years == 0 {
        return Err(Error::Invalid("train and test spans must be at least one year".into()));
    }
    let (Some(first), Some(last)) = (calendar.iter().min(), calendar.iter().max()) else {
        return Err(Error::Insufficient("empty calendar".into()));
    };
    let (y0, y1) = (first.year(), last.year());
    let span = (y1 - y0 + 1) as u32;
    let (train, test) = (spec.train_years as i32, spec.test_years as i32);
    if span < spec.train_years + spec.test_years {
        return Err(Error::Insufficient(format!(
            "calendar spans {span} years, need {}",
            spec.train_years + spec.test_years
        )));
    }
    let mut splits = Vec::new();
    let mut i = 0;
    loop {
        let test_start = y0 + train + i * test;
        let test_end = test_start + test - 1;
        if test_end > y1 {
            break;
        }
        let number = i as usize + 1;
        let train_start = match spec.extend_from {
            Some(k) if number >= k && k >= 2 => y0 + (k as i32 - 2) * test,
            _ => y0 + i * test,
        };
        let train_years = train_start..=test_start - 1;
        let test_years = test_start..=test_end;
        splits.push(Split {
            index: i as usize,
            train: year_bounds(train_years.clone()),
            test: year_bounds(test_years.clone()),
            train_years,
            test_years,
        });
        i += 1;
    }
    Ok(splits)
}
