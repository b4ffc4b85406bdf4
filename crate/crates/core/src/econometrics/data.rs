use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::portfolio::{CrossSection, FactorRow, SignalPanel, SignalRow};
use crate::error::{Error, Result};
use crate::event_model::{Mode, ReturnRow};

/// Past 1-week, 2-week and 1-month windows, in periods.
pub fn default_control_windows(mode: Mode) -> Vec<usize> {
    match mode {
        Mode::Daily => vec![5, 10, 21],
        Mode::Weekly => vec![1, 2, 4],
    }
}

/// Returns on a trading calendar, one map of stock → return per date.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReturnTable {
    pub calendar: Vec<NaiveDate>,
    pub by_date: Vec<BTreeMap<i64, f64>>,
}

impl ReturnTable {
    pub fn from_rows(rows: &[ReturnRow]) -> Result<Self> {
        let mut m: BTreeMap<NaiveDate, BTreeMap<i64, f64>> = BTreeMap::new();
        for r in rows {
            if m.entry(r.date).or_default().insert(r.stock_id, r.ret).is_some() {
                return Err(Error::Invalid(format!("duplicate return for stock {} on {}", r.stock_id, r.date)));
            }
        }
        let (calendar, by_date) = m.into_iter().unzip();
        Ok(Self { calendar, by_date })
    }

    /// Index of the first calendar date strictly after `date`.
    pub fn next_index(&self, date: NaiveDate) -> Option<usize> {
        let i = self.calendar.partition_point(|d| *d <= date);
        (i < self.calendar.len()).then_some(i)
    }

    /// Mean return of `stock` over the `window` dates before index `end`;
    /// `None` if any of them is missing.
    pub fn trailing_mean(&self, stock: i64, end: usize, window: usize) -> Option<f64> {
        if window == 0 || end < window {
            return None;
        }
        let mut s = 0.0;
        for m in &self.by_date[end - window..end] {
            s += m.get(&stock)?;
        }
        Some(s / window as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalFileRow {
    pub date: NaiveDate,
    pub stock_id: i64,
    pub signal: f64,
}

pub fn read_signals_csv(path: &Path) -> Result<Vec<SignalFileRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for r in rdr.deserialize() {
        let r: SignalFileRow = r?;
        if !r.signal.is_finite() {
            return Err(Error::Domain(format!("non-finite signal for stock {} on {}", r.stock_id, r.date)));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn read_factors_csv(path: &Path) -> Result<Vec<FactorRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows: std::result::Result<Vec<FactorRow>, _> = rdr.deserialize().collect();
    Ok(rows?)
}

/// Aligns signals with the returns of the next trading date. Each panel
/// period is one calendar date of `returns` (used as the period label), so
/// delayed portfolios walk the returns calendar. When several signal dates
/// fall before the same trading date, the latest one wins. Controls are
/// trailing mean returns over `control_windows` dates before the holding date.
pub fn panel_from_returns(signals: &[SignalFileRow], returns: &ReturnTable, control_windows: &[usize]) -> Result<(SignalPanel, Vec<String>)> {
    let mut latest: BTreeMap<(usize, i64), (NaiveDate, f64)> = BTreeMap::new();
    let mut dropped = 0usize;
    for s in signals {
        let Some(j) = returns.next_index(s.date) else {
            dropped += 1;
            continue;
        };
        let e = latest.entry((j, s.stock_id)).or_insert((s.date, s.signal));
        if s.date >= e.0 {
            *e = (s.date, s.signal);
        }
    }
    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("{dropped} signals fall after the last return date"));
    }
    let Some(first) = latest.keys().next().map(|k| k.0) else {
        return Err(Error::Insufficient("no signal aligns with the returns calendar".into()));
    };
    let mut periods: Vec<CrossSection> = (first..returns.calendar.len())
        .map(|j| CrossSection { date: returns.calendar[j], rows: Vec::new() })
        .collect();
    let mut missing = 0usize;
    for ((j, stock), (_, signal)) in latest {
        let Some(&realized) = returns.by_date[j].get(&stock) else {
            missing += 1;
            continue;
        };
        let controls = control_windows.iter().map(|&w| returns.trailing_mean(stock, j, w)).collect();
        periods[j - first].rows.push(SignalRow { stock_id: stock, signal, realized, controls });
    }
    if missing > 0 {
        warnings.push(format!("{missing} signals have no return on their holding date"));
    }
    let control_names = control_windows.iter().map(|w| format!("ret_mean_{w}")).collect();
    let realized = returns.by_date[first..].to_vec();
    Ok((SignalPanel { periods, control_names, realized }, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 6, day).unwrap()
    }

    fn table() -> ReturnTable {
        let mut rows = Vec::new();
        for (i, day) in [1, 2, 3, 4, 7, 8].into_iter().enumerate() {
            for s in 0..3 {
                rows.push(ReturnRow { date: d(day), stock_id: s, ret: 0.01 * (i as f64 + 1.0) + s as f64 });
            }
        }
        ReturnTable::from_rows(&rows).unwrap()
    }

    #[test]
    fn weekend_signal_uses_monday_return() {
        let t = table();
        assert_eq!(t.next_index(d(5)), Some(4));
        assert_eq!(t.next_index(d(4)), Some(4));
        assert_eq!(t.next_index(d(8)), None);
        let sig = [
            SignalFileRow { date: d(4), stock_id: 1, signal: 1.0 },
            SignalFileRow { date: d(6), stock_id: 1, signal: 2.0 },
        ];
        let (p, _) = panel_from_returns(&sig, &t, &[2]).unwrap();
        assert_eq!(p.periods[0].date, d(7));
        assert_eq!(p.periods[0].rows[0].signal, 2.0);
        assert!((p.periods[0].rows[0].realized - 1.05).abs() < 1e-12);
        let c = p.periods[0].rows[0].controls[0].unwrap();
        assert!((c - (1.03 + 1.04) / 2.0).abs() < 1e-12);
        assert_eq!(p.periods.len(), 2);
    }

    #[test]
    fn short_history_leaves_control_missing() {
        let t = table();
        assert_eq!(t.trailing_mean(0, 1, 2), None);
        assert!((t.trailing_mean(0, 2, 2).unwrap() - 0.015).abs() < 1e-15);
    }
}
