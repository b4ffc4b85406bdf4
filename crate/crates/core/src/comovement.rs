//! Entity-driven comovement: firms with the highest news exposure to an
//! entity, the trading days after the entity hits several of them at once,
//! and the change in their pairwise return correlation around those days.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::econometrics::ReturnTable;
use crate::error::{Error, Result};
use crate::event_model::{entity_key, PanelRecord};

/// One entity occurrence (subject or object role) in a firm's news.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub stock_id: i64,
    pub date: NaiveDate,
    pub entity: String,
}

/// Canonical subject and object keys of every event, in record order.
pub fn mentions(records: &[PanelRecord]) -> Vec<Mention> {
    let mut out = Vec::new();
    for r in records {
        for e in &r.events {
            let t = &e.triplet;
            for (surface, link) in [(&t.subject, &t.subject_link), (&t.object, &t.object_link)] {
                out.push(Mention { stock_id: r.stock_id, date: r.date, entity: entity_key(surface, link.as_deref()).key });
            }
        }
    }
    out
}

/// `TF · ln((1 + N_docs) / (1 + DF))`.
pub fn exposure_weight(tf: f64, n_docs: usize, df: usize) -> f64 {
    tf * ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln()
}

/// Firm-by-entity exposure; each firm's full event history is one document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExposureMatrix {
    pub n_docs: usize,
    pub df: BTreeMap<String, usize>,
    /// entity → firm → exposure (only firms that mention the entity).
    pub exposure: BTreeMap<String, BTreeMap<i64, f64>>,
}

pub fn exposure<'a>(mentions: impl IntoIterator<Item = &'a Mention>) -> ExposureMatrix {
    let mut tf: BTreeMap<String, BTreeMap<i64, usize>> = BTreeMap::new();
    let mut firms = BTreeSet::new();
    for m in mentions {
        firms.insert(m.stock_id);
        *tf.entry(m.entity.clone()).or_default().entry(m.stock_id).or_default() += 1;
    }
    let n_docs = firms.len();
    let df: BTreeMap<String, usize> = tf.iter().map(|(e, f)| (e.clone(), f.len())).collect();
    let exposure = tf
        .into_iter()
        .map(|(e, f)| {
            let d = df[&e];
            (e, f.into_iter().map(|(s, c)| (s, exposure_weight(c as f64, n_docs, d))).collect())
        })
        .collect();
    ExposureMatrix { n_docs, df, exposure }
}

/// The `k` firms with the largest positive exposure to `entity`, ties by id.
/// Returns fewer (with a warning) when the universe is too small.
pub fn top_k_portfolio(entity: &str, exposures: &ExposureMatrix, k: usize) -> (Vec<i64>, Option<String>) {
    let mut firms: Vec<(i64, f64)> = exposures
        .exposure
        .get(entity)
        .map(|m| m.iter().filter(|(_, &x)| x > 0.0).map(|(&s, &x)| (s, x)).collect())
        .unwrap_or_default();
    firms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let warning = (firms.len() < k).then(|| format!("{entity}: only {} firms with positive exposure, wanted {k}", firms.len()));
    firms.truncate(k);
    (firms.into_iter().map(|f| f.0).collect(), warning)
}

/// Calendar indices of shock days: `shift` trading days after each news day
/// on which at least `min_firms` portfolio firms mention `entity` or an alias.
/// News on a non-trading date counts from the preceding trading date, so a
/// shift of one lands on the next session.
pub fn detect_shocks(
    entity: &str,
    aliases: &[String],
    portfolio: &[i64],
    mentions: &[Mention],
    calendar: &[NaiveDate],
    min_firms: usize,
    shift: usize,
) -> Result<Vec<usize>> {
    if min_firms == 0 {
        return Err(Error::Invalid("min_firms must be at least 1".into()));
    }
    let names: BTreeSet<&str> = std::iter::once(entity).chain(aliases.iter().map(String::as_str)).collect();
    let members: BTreeSet<i64> = portfolio.iter().copied().collect();
    let mut hits: BTreeMap<NaiveDate, BTreeSet<i64>> = BTreeMap::new();
    for m in mentions {
        if members.contains(&m.stock_id) && names.contains(m.entity.as_str()) {
            hits.entry(m.date).or_default().insert(m.stock_id);
        }
    }
    let mut shocks = BTreeSet::new();
    for (day, firms) in hits {
        if firms.len() < min_firms {
            continue;
        }
        let p = calendar.partition_point(|d| *d <= day);
        if let Some(i) = (p + shift).checked_sub(1).filter(|&i| i < calendar.len()) {
            shocks.insert(i);
        }
    }
    Ok(shocks.into_iter().collect())
}

/// Mean Pearson correlation over all firm pairs, using the days on which both
/// firms have a return. Pairs with fewer than two common days or zero
/// variance are skipped and counted.
pub fn mean_pairwise_correlation(columns: &[Vec<Option<f64>>]) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut skipped = 0usize;
    for a in 0..columns.len() {
        for b in a + 1..columns.len() {
            let pairs: Vec<(f64, f64)> = columns[a].iter().zip(&columns[b]).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
            match pearson(&pairs) {
                Some(r) => {
                    sum += r;
                    n += 1;
                }
                None => skipped += 1,
            }
        }
    }
    ((n > 0).then(|| sum / n as f64), skipped)
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Event-window minus baseline-window mean pairwise correlation, with the
/// skipped-pair count of both windows.
pub fn window_delta(event: &[Vec<Option<f64>>], base: &[Vec<Option<f64>>]) -> (Option<(f64, f64)>, usize) {
    let (re, se) = mean_pairwise_correlation(event);
    let (rb, sb) = mean_pairwise_correlation(base);
    (re.zip(rb), se + sb)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    /// Trading days between the event window and each baseline flank.
    pub pad: usize,
    /// Length of each baseline flank.
    pub flank: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { pad: 5, flank: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockStat {
    pub date: NaiveDate,
    pub rho_event: f64,
    pub rho_base: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRho {
    pub tau: usize,
    pub shocks: Vec<ShockStat>,
    /// Means over the scored shocks; NaN when none could be scored.
    pub rho_event: f64,
    pub rho_base: f64,
    pub delta: f64,
    /// Two-sided one-sample t-test of the per-shock differences against 0.
    pub p_value: Option<f64>,
    /// Shocks without room for the windows or without any scorable pair.
    pub skipped_shocks: usize,
    pub skipped_pairs: usize,
    /// Scored shocks whose baseline flanks overlap another shock's event window.
    pub overlapping: usize,
}

fn window_columns(returns: &ReturnTable, portfolio: &[i64], days: impl Iterator<Item = usize> + Clone) -> Vec<Vec<Option<f64>>> {
    portfolio
        .iter()
        .map(|s| days.clone().map(|d| returns.by_date[d].get(s).copied()).collect())
        .collect()
}

/// Event window `[t−τ, t+τ]` against the pooled flanks
/// `[t−τ−pad−flank, t−τ−pad)` and `(t+τ+pad, t+τ+pad+flank]`.
pub fn delta_rho(returns: &ReturnTable, portfolio: &[i64], shocks: &[usize], tau: usize, spec: WindowSpec) -> DeltaRho {
    let len = returns.calendar.len();
    let reach = tau + spec.pad + spec.flank;
    let mut out = DeltaRho {
        tau,
        shocks: Vec::new(),
        rho_event: f64::NAN,
        rho_base: f64::NAN,
        delta: f64::NAN,
        p_value: None,
        skipped_shocks: 0,
        skipped_pairs: 0,
        overlapping: 0,
    };
    for &t in shocks {
        if t < reach || t + reach >= len {
            out.skipped_shocks += 1;
            continue;
        }
        let event = window_columns(returns, portfolio, t - tau..=t + tau);
        let left = t - reach..t - tau - spec.pad;
        let right = t + tau + spec.pad + 1..=t + reach;
        let base = window_columns(returns, portfolio, left.clone().chain(right.clone()));
        let (pair, skipped) = window_delta(&event, &base);
        out.skipped_pairs += skipped;
        let Some((re, rb)) = pair else {
            out.skipped_shocks += 1;
            continue;
        };
        let contaminated = shocks.iter().any(|&o| {
            o != t && {
                let (lo, hi) = (o.saturating_sub(tau), o + tau);
                left.clone().chain(right.clone()).any(|d| d >= lo && d <= hi)
            }
        });
        out.overlapping += usize::from(contaminated);
        out.shocks.push(ShockStat { date: returns.calendar[t], rho_event: re, rho_base: rb, delta: re - rb });
    }
    let n = out.shocks.len();
    if n > 0 {
        out.rho_event = out.shocks.iter().map(|s| s.rho_event).sum::<f64>() / n as f64;
        out.rho_base = out.shocks.iter().map(|s| s.rho_base).sum::<f64>() / n as f64;
        out.delta = out.shocks.iter().map(|s| s.delta).sum::<f64>() / n as f64;
        out.p_value = t_test_p(&out.shocks.iter().map(|s| s.delta).collect::<Vec<_>>());
    }
    out
}

fn t_test_p(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd == 0.0 {
        return None;
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
    Some(2.0 * (1.0 - dist.cdf(t.abs())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaveOneOut {
    pub date: NaiveDate,
    /// Relative fall (fraction) in the mean event-window correlation without this shock.
    pub post_corr_drop: f64,
    /// Relative fall (fraction) in Δρ without this shock.
    pub delta_drop: f64,
}

/// `(full − without s) / full` for the mean event correlation and Δρ.
pub fn leave_one_out(result: &DeltaRho) -> Result<Vec<LeaveOneOut>> {
    let s = &result.shocks;
    let n = s.len();
    if n < 2 {
        return Err(Error::Insufficient(format!("{n} scored shocks, leave-one-out needs at least 2")));
    }
    let full_e = s.iter().map(|x| x.rho_event).sum::<f64>() / n as f64;
    let full_d = s.iter().map(|x| x.delta).sum::<f64>() / n as f64;
    Ok((0..n)
        .map(|i| {
            let red_e = s.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.rho_event).sum::<f64>() / (n - 1) as f64;
            let red_d = s.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.delta).sum::<f64>() / (n - 1) as f64;
            LeaveOneOut {
                date: s[i].date,
                post_corr_drop: (full_e - red_e) / full_e,
                delta_drop: (full_d - red_d) / full_d,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    High,
    Mid,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueThresholds {
    pub high: f64,
    pub mid: f64,
}

impl Default for ValueThresholds {
    fn default() -> Self {
        Self { high: 0.0015, mid: 0.0010 }
    }
}

/// Three rank groups of near-equal size (larger groups first).
pub fn group_equal(scores: &[(String, f64)]) -> BTreeMap<String, Group> {
    let mut order: Vec<&(String, f64)> = scores.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let n = order.len();
    let sizes = [n / 3 + usize::from(n % 3 > 0), n / 3 + usize::from(n % 3 > 1), n / 3];
    let mut out = BTreeMap::new();
    let mut it = order.into_iter();
    for (g, size) in [Group::High, Group::Mid, Group::Low].into_iter().zip(sizes) {
        for (name, _) in it.by_ref().take(size) {
            out.insert(name.clone(), g);
        }
    }
    out
}

/// High for score ≥ `high`, Mid for `mid` ≤ score < `high`, Low otherwise.
pub fn group_value(score: f64, t: ValueThresholds) -> Group {
    if score >= t.high {
        Group::High
    } else if score >= t.mid {
        Group::Mid
    } else {
        Group::Low
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComoveConfig {
    pub top_k: usize,
    pub min_firms: usize,
    pub shift: usize,
    pub min_shocks: usize,
    pub taus: Vec<usize>,
    pub window: WindowSpec,
    pub thresholds: ValueThresholds,
    /// Extra surface keys that count as the focal entity.
    pub aliases: BTreeMap<String, Vec<String>>,
    /// Window used for the per-shock leave-one-out table.
    pub loo_tau: usize,
}

impl Default for ComoveConfig {
    fn default() -> Self {
        Self {
            top_k: 15,
            min_firms: 3,
            shift: 1,
            min_shocks: 5,
            taus: (0..=6).collect(),
            window: WindowSpec::default(),
            thresholds: ValueThresholds::default(),
            aliases: BTreeMap::new(),
            loo_tau: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityComove {
    pub entity: String,
    pub score: f64,
    pub portfolio: Vec<i64>,
    pub shock_dates: Vec<NaiveDate>,
    pub by_tau: Vec<DeltaRho>,
    pub equal_group: Group,
    pub value_group: Group,
    pub leave_one_out: Vec<LeaveOneOut>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComoveReport {
    pub entities: Vec<EntityComove>,
    /// Focal entities that did not survive portfolio or shock filters.
    pub excluded: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

enum Outcome {
    Kept(Box<EntityComove>, Vec<String>),
    Excluded(String, String, Vec<String>),
}

/// Runs the full analysis for each focal `(entity, importance)` pair. Equal
/// groups are formed over the entities that survive the shock filter.
pub fn analyze(focal: &[(String, f64)], mentions: &[Mention], returns: &ReturnTable, cfg: &ComoveConfig) -> Result<ComoveReport> {
    if cfg.top_k < 2 {
        return Err(Error::Invalid("top_k must be at least 2 to form pairs".into()));
    }
    if let Some(t) = cfg.taus.iter().find(|&&t| t > 6) {
        return Err(Error::Invalid(format!("window ±{t}d outside the supported 0..=6 range")));
    }
    let exp = exposure(mentions);
    let no_alias = Vec::new();
    let outcomes: Vec<Result<Outcome>> = focal
        .par_iter()
        .map(|(entity, score)| {
            let (portfolio, w) = top_k_portfolio(entity, &exp, cfg.top_k);
            let warnings: Vec<String> = w.into_iter().collect();
            if portfolio.len() < 2 {
                return Ok(Outcome::Excluded(entity.clone(), "fewer than two exposed firms".into(), warnings));
            }
            let aliases = cfg.aliases.get(entity).unwrap_or(&no_alias);
            let shocks = detect_shocks(entity, aliases, &portfolio, mentions, &returns.calendar, cfg.min_firms, cfg.shift)?;
            if shocks.len() < cfg.min_shocks {
                return Ok(Outcome::Excluded(entity.clone(), format!("{} shock days, need {}", shocks.len(), cfg.min_shocks), warnings));
            }
            let by_tau: Vec<DeltaRho> = cfg.taus.iter().map(|&t| delta_rho(returns, &portfolio, &shocks, t, cfg.window)).collect();
            let loo = delta_rho(returns, &portfolio, &shocks, cfg.loo_tau, cfg.window);
            let leave_one_out = leave_one_out(&loo).unwrap_or_default();
            Ok(Outcome::Kept(
                Box::new(EntityComove {
                    entity: entity.clone(),
                    score: *score,
                    portfolio,
                    shock_dates: shocks.iter().map(|&i| returns.calendar[i]).collect(),
                    by_tau,
                    equal_group: Group::Low,
                    value_group: group_value(*score, cfg.thresholds),
                    leave_one_out,
                }),
                warnings,
            ))
        })
        .collect();
    let mut report = ComoveReport::default();
    for o in outcomes {
        match o? {
            Outcome::Kept(e, w) => {
                report.entities.push(*e);
                report.warnings.extend(w);
            }
            Outcome::Excluded(e, why, w) => {
                report.excluded.push((e, why));
                report.warnings.extend(w);
            }
        }
    }
    let scores: Vec<(String, f64)> = report.entities.iter().map(|e| (e.entity.clone(), e.score)).collect();
    let eq = group_equal(&scores);
    for e in &mut report.entities {
        e.equal_group = eq[&e.entity];
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummaryRow {
    pub scheme: String,
    pub group: Group,
    pub tau: usize,
    pub entities: usize,
    /// `None` when no entity in the group could be scored at this window.
    pub avg_delta: Option<f64>,
    /// Shares of entities (fractions) with Δρ > 0, p < 0.05 and p < 0.01.
    pub share_mean_pos: Option<f64>,
    pub share_p05: Option<f64>,
    pub share_p01: Option<f64>,
}

/// Per scheme, group and window: average Δρ across entities and the shares
/// of entities with positive Δρ and with p below 5% and 1%.
pub fn summarize(report: &ComoveReport) -> Vec<GroupSummaryRow> {
    let mut rows = Vec::new();
    for scheme in ["equal", "value"] {
        for group in [Group::High, Group::Mid, Group::Low] {
            let members: Vec<&EntityComove> = report
                .entities
                .iter()
                .filter(|e| (if scheme == "equal" { e.equal_group } else { e.value_group }) == group)
                .collect();
            let taus: BTreeSet<usize> = members.iter().flat_map(|e| e.by_tau.iter().map(|d| d.tau)).collect();
            for tau in taus {
                let d: Vec<&DeltaRho> = members
                    .iter()
                    .filter_map(|e| e.by_tau.iter().find(|d| d.tau == tau))
                    .filter(|d| d.delta.is_finite())
                    .collect();
                let n = d.len();
                let share = |f: &dyn Fn(&DeltaRho) -> bool| (n > 0).then(|| d.iter().filter(|x| f(x)).count() as f64 / n as f64);
                rows.push(GroupSummaryRow {
                    scheme: scheme.into(),
                    group,
                    tau,
                    entities: n,
                    avg_delta: (n > 0).then(|| d.iter().map(|x| x.delta).sum::<f64>() / n as f64),
                    share_mean_pos: share(&|x| x.delta > 0.0),
                    share_p05: share(&|x| x.p_value.is_some_and(|p| p < 0.05)),
                    share_p01: share(&|x| x.p_value.is_some_and(|p| p < 0.01)),
                });
            }
        }
    }
    rows
}

pub fn write_summary_csv(path: &Path, rows: &[GroupSummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Serialize)]
struct EntityRow<'a> {
    entity: &'a str,
    score: f64,
    equal_group: Group,
    value_group: Group,
    tau: usize,
    shocks_scored: usize,
    rho_event: Option<f64>,
    rho_base: Option<f64>,
    delta_rho: Option<f64>,
    p_value: Option<f64>,
    skipped_shocks: usize,
    skipped_pairs: usize,
    overlapping: usize,
}

pub fn write_entities_csv(path: &Path, report: &ComoveReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in &report.entities {
        for d in &e.by_tau {
            w.serialize(EntityRow {
                entity: &e.entity,
                score: e.score,
                equal_group: e.equal_group,
                value_group: e.value_group,
                tau: d.tau,
                shocks_scored: d.shocks.len(),
                rho_event: finite(d.rho_event),
                rho_base: finite(d.rho_base),
                delta_rho: finite(d.delta),
                p_value: d.p_value,
                skipped_shocks: d.skipped_shocks,
                skipped_pairs: d.skipped_pairs,
                overlapping: d.overlapping,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LooRow<'a> {
    entity: &'a str,
    date: NaiveDate,
    post_corr_drop: f64,
    delta_drop: f64,
}

pub fn write_leave_one_out_csv(path: &Path, report: &ComoveReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in &report.entities {
        for l in &e.leave_one_out {
            w.serialize(LooRow { entity: &e.entity, date: l.date, post_corr_drop: l.post_corr_drop, delta_drop: l.delta_drop })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub subject: String,
    pub action: String,
    pub object: String,
    pub count: usize,
}

/// Triplets from the portfolio firms' news whose subject and object both lie
/// within two subject–object hops of `entity`.
pub fn edge_list(entity: &str, portfolio: &[i64], records: &[PanelRecord]) -> Vec<Edge> {
    let members: BTreeSet<i64> = portfolio.iter().copied().collect();
    let mut triplets: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records.iter().filter(|r| members.contains(&r.stock_id)) {
        for e in &r.events {
            let t = &e.triplet;
            let s = entity_key(&t.subject, t.subject_link.as_deref()).key;
            let o = entity_key(&t.object, t.object_link.as_deref()).key;
            adj.entry(s.clone()).or_default().insert(o.clone());
            adj.entry(o.clone()).or_default().insert(s.clone());
            *triplets.entry((s, t.action.trim().to_lowercase(), o)).or_default() += 1;
        }
    }
    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    if adj.contains_key(entity) {
        dist.insert(entity, 0);
        queue.push_back(entity);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        if du == 2 {
            continue;
        }
        for v in &adj[u] {
            if !dist.contains_key(v.as_str()) {
                dist.insert(v, du + 1);
                queue.push_back(v);
            }
        }
    }
    triplets
        .into_iter()
        .filter(|((s, _, o), _)| dist.contains_key(s.as_str()) && dist.contains_key(o.as_str()))
        .map(|((subject, action, object), count)| Edge { subject, action, object, count })
        .collect()
}

pub fn write_edges_csv(path: &Path, edges: &[Edge]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in edges {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}
