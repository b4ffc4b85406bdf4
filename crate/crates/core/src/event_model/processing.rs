use std::collections::{BTreeMap, HashSet};

use super::panel::{DaySlice, ObservationConfig};
use super::vocab::CanonicalEvent;
use crate::error::{Error, Result};

/// Keeps the first occurrence of each identical triplet, preserving order.
pub fn dedupe_events(events: &[CanonicalEvent]) -> Vec<CanonicalEvent> {
    let mut seen = HashSet::with_capacity(events.len());
    events.iter().copied().filter(|e| seen.insert(*e)).collect()
}

/// Lowercased alphanumeric token counts.
pub fn term_frequencies(text: &str) -> BTreeMap<String, f64> {
    let mut tf = BTreeMap::new();
    for tok in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        *tf.entry(tok.to_lowercase()).or_insert(0.0) += 1.0;
    }
    tf
}

/// Cosine of two term-frequency vectors; 0 when either is empty.
pub fn cosine_similarity(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(k, v)| large.get(k).map(|w| v * w)).sum();
    dot / (na * nb)
}

/// Scans articles in order and drops any whose cosine similarity with an
/// earlier *kept* article exceeds `threshold`. Returns kept indices.
pub fn dedupe_articles(articles: &[BTreeMap<String, f64>], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Invalid(format!("similarity threshold {threshold} not in (0, 1]")));
    }
    let mut kept: Vec<usize> = Vec::new();
    for (j, art) in articles.iter().enumerate() {
        if kept.iter().all(|&i| cosine_similarity(&articles[i], art) <= threshold) {
            kept.push(j);
        }
    }
    Ok(kept)
}

/// `exp(Σ ln(1 + r_i)) − 1` over one week of daily returns.
pub fn compound_weekly(daily_returns: &[f64]) -> Result<f64> {
    if daily_returns.is_empty() || daily_returns.len() > 5 {
        return Err(Error::Domain(format!(
            "weekly compounding needs 1..=5 daily returns, got {}",
            daily_returns.len()
        )));
    }
    let mut log_sum = 0.0;
    for &r in daily_returns {
        if !(r > -1.0) || !r.is_finite() {
            return Err(Error::Domain(format!("daily return {r} must be finite and > -1")));
        }
        log_sum += r.ln_1p();
    }
    Ok(log_sum.exp_m1())
}

/// Dedupes, truncates to `cfg.max_events` keeping first-seen order, and pads
/// the rest of the slots with PAD triplets.
pub fn build_observation(raw_events: &[CanonicalEvent], cfg: &ObservationConfig) -> DaySlice {
    let mut events = dedupe_events(raw_events);
    events.truncate(cfg.max_events);
    let real = events.len();
    events.resize(cfg.max_events, CanonicalEvent::PAD);
    let mut mask = vec![false; cfg.max_events];
    mask[..real].iter_mut().for_each(|m| *m = true);
    DaySlice { events, mask }
}
