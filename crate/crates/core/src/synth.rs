//! Synthetic event panels with planted return effects, for tests and demos.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::econometrics::FactorRow;
use crate::error::{Error, Result};
use crate::event_model::{normalize_action, write_panel_records, EventRecord, EventTriplet, Mode, PanelRecord, ReturnRow};
use crate::seeds;

/// A triplet (by pool index) whose presence adds `effect` to the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub pool_index: usize,
    pub effect: f64,
    /// Probability that an observation carries this event.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub mode: Mode,
    pub n_stocks: usize,
    pub n_periods: usize,
    pub n_entities: usize,
    pub n_actions: usize,
    /// Number of distinct event triplets.
    pub pool_size: usize,
    /// Background events per observation, drawn uniformly from this range.
    pub min_events: usize,
    pub max_events: usize,
    /// Probability that a stock has news in a period.
    pub coverage: f64,
    pub planted: Vec<PlantedEffect>,
    pub noise_sd: f64,
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Daily,
            n_stocks: 200,
            n_periods: 300,
            n_entities: 120,
            n_actions: 40,
            pool_size: 500,
            min_events: 1,
            max_events: 4,
            coverage: 1.0,
            planted: vec![PlantedEffect { pool_index: 0, effect: 0.02, probability: 0.1 }],
            noise_sd: 0.02,
            start: NaiveDate::from_ymd_opt(2015, 1, 2).expect("valid date"),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSummary {
    /// Canonical `subject-action-object` key.
    pub key: String,
    pub effect: f64,
    pub occurrences: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub planted: Vec<PlantedSummary>,
    pub records: usize,
    pub target_mean: f64,
    pub target_sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub records: Vec<PanelRecord>,
    /// Every stock's return on every calendar date after the first.
    pub returns: Vec<ReturnRow>,
    pub factors: Vec<FactorRow>,
    pub manifest: SynthManifest,
}

const THEMES: [&str; 8] = [
    "crude oil barrel refinery pipeline drilling",
    "vaccine trial dose patient clinical approval",
    "merger acquisition bid shareholder takeover premium",
    "bankruptcy creditor default restructuring debt lender",
    "airline flight route passenger fleet airport",
    "chip semiconductor wafer foundry processor supply",
    "retail store shopper holiday sales consumer",
    "bank lending deposit mortgage rate credit",
];

/// Weekdays (daily) or Mondays (weekly) starting on or after `start`.
fn calendar(start: NaiveDate, n: usize, mode: Mode) -> Vec<NaiveDate> {
    let mut d = start;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let keep = match mode {
            Mode::Daily => !matches!(d.weekday(), Weekday::Sat | Weekday::Sun),
            Mode::Weekly => d.weekday() == Weekday::Mon,
        };
        if keep {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn actions(n: usize) -> Result<Vec<String>> {
    let verbs: Vec<String> = include_str!("event_model/base_verbs.txt")
        .split_whitespace()
        .filter(|v| normalize_action(v) == *v)
        .take(n)
        .map(str::to_string)
        .collect();
    if verbs.len() < n {
        return Err(Error::Invalid(format!("at most {} distinct actions are available", verbs.len())));
    }
    Ok(verbs)
}

/// Generates records whose target is the sum of planted effects present plus
/// Gaussian noise. Record dates are the period labels; the target is the
/// return on the next calendar date, which the returns file repeats.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.n_stocks < 5 || spec.n_periods < 2 {
        return Err(Error::Invalid("need at least 5 stocks and 2 periods".into()));
    }
    if spec.min_events > spec.max_events || !(0.0..=1.0).contains(&spec.coverage) || spec.noise_sd < 0.0 {
        return Err(Error::Invalid("inconsistent event-count range, coverage or noise".into()));
    }
    let n_ent = spec.n_entities.max(2);
    if spec.pool_size > n_ent * n_ent * spec.n_actions {
        return Err(Error::Invalid(format!("pool of {} exceeds the number of distinct triplets", spec.pool_size)));
    }
    if let Some(p) = spec.planted.iter().find(|p| p.pool_index >= spec.pool_size || !(0.0..=1.0).contains(&p.probability)) {
        return Err(Error::Invalid(format!("planted effect on pool index {} is out of range", p.pool_index)));
    }
    let acts = actions(spec.n_actions)?;
    let mut rng = seeds::rng(spec.seed, "synth");
    let mut seen = BTreeSet::new();
    let mut pool: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(spec.pool_size);
    while pool.len() < spec.pool_size {
        let t = (rng.gen_range(0..n_ent), rng.gen_range(0..spec.n_actions), rng.gen_range(0..n_ent));
        if seen.insert(t) {
            pool.push((t.0, t.1, t.2, rng.gen_range(0..THEMES.len())));
        }
    }
    let triplet = |i: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let (s, a, o, theme) = pool[i];
        let words: Vec<&str> = THEMES[theme].split(' ').collect();
        let picked: Vec<&str> = words.choose_multiple(rng, 3).copied().collect();
        EventTriplet {
            subject: format!("ent{s:03}"),
            subject_link: None,
            action: acts[a].clone(),
            object: format!("ent{o:03}"),
            object_link: None,
            context: format!("Ent{s:03} moved to {} ent{o:03} amid {}.", acts[a], picked.join(" ")),
        }
    };
    let planted_set: BTreeSet<usize> = spec.planted.iter().map(|p| p.pool_index).collect();
    let background: Vec<usize> = (0..spec.pool_size).filter(|i| !planted_set.contains(i)).collect();
    if background.is_empty() && spec.max_events > 0 {
        return Err(Error::Invalid("every pool event is planted; no background events remain".into()));
    }
    let cal = calendar(spec.start, spec.n_periods + 1, spec.mode);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut records = Vec::new();
    let mut returns = Vec::new();
    let mut occurrences = vec![0usize; spec.planted.len()];
    let days = match spec.mode {
        Mode::Daily => 1,
        Mode::Weekly => 5,
    };
    for t in 0..spec.n_periods {
        for stock in 0..spec.n_stocks {
            let mut ret = noise.sample(&mut rng);
            if rng.gen::<f64>() < spec.coverage {
                let k = rng.gen_range(spec.min_events..=spec.max_events);
                let mut chosen: Vec<usize> = (0..k).map(|_| background[rng.gen_range(0..background.len())]).collect();
                for (j, p) in spec.planted.iter().enumerate() {
                    if rng.gen::<f64>() < p.probability {
                        chosen.push(p.pool_index);
                        ret += p.effect;
                        occurrences[j] += 1;
                    }
                }
                chosen.shuffle(&mut rng);
                if !chosen.is_empty() {
                    let events = chosen
                        .iter()
                        .map(|&i| EventRecord {
                            triplet: triplet(i, &mut rng),
                            day: (spec.mode == Mode::Weekly).then(|| rng.gen_range(1..=days) as u8),
                        })
                        .collect();
                    records.push(PanelRecord { stock_id: 10_000 + stock as i64, date: cal[t], events, target_return: ret });
                }
            }
            returns.push(ReturnRow { date: cal[t + 1], stock_id: 10_000 + stock as i64, ret });
        }
    }
    let factor = Normal::new(0.0, 0.01).expect("finite sd");
    let factors = cal
        .iter()
        .map(|&date| FactorRow {
            date,
            mktrf: factor.sample(&mut rng),
            smb: factor.sample(&mut rng),
            hml: factor.sample(&mut rng),
            rmw: factor.sample(&mut rng),
            cma: factor.sample(&mut rng),
            rf: 0.0,
        })
        .collect();
    let n = records.len().max(1) as f64;
    let mean = records.iter().map(|r| r.target_return).sum::<f64>() / n;
    let sd = (records.iter().map(|r| (r.target_return - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let planted = spec
        .planted
        .iter()
        .zip(occurrences)
        .map(|(p, occ)| {
            let (s, a, o, _) = pool[p.pool_index];
            PlantedSummary { key: format!("ent{s:03}-{}-ent{o:03}", acts[a]), effect: p.effect, occurrences: occ }
        })
        .collect();
    Ok(SynthData {
        manifest: SynthManifest { spec: spec.clone(), planted, records: records.len(), target_mean: mean, target_sd: sd },
        records,
        returns,
        factors,
    })
}

impl SynthData {
    /// Writes `panel.jsonl`, `returns.csv`, `factors.csv` and `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_panel_records(&dir.join("panel.jsonl"), &self.records)?;
        let mut w = csv::Writer::from_path(dir.join("returns.csv"))?;
        for r in &self.returns {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("factors.csv"))?;
        for f in &self.factors {
            w.serialize(f)?;
        }
        w.flush()?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }
}
