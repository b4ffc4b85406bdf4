use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::ols;
use crate::error::{Error, Result};

/// One stock in one period's cross-section. `realized` is the return the
/// signal is meant to predict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalRow {
    pub stock_id: i64,
    pub signal: f64,
    pub realized: f64,
    /// Control values, aligned with [`SignalPanel::control_names`]; `None`
    /// when history is too short.
    #[serde(default)]
    pub controls: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub date: NaiveDate,
    pub rows: Vec<SignalRow>,
}

/// Chronological sequence of cross-sections over consecutive trading
/// intervals. `realized[p]` maps every stock with a known return for period
/// `p` (possibly more than carry a signal) and drives delayed portfolios.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalPanel {
    pub periods: Vec<CrossSection>,
    pub control_names: Vec<String>,
    pub realized: Vec<BTreeMap<i64, f64>>,
}

impl SignalPanel {
    /// Groups rows by date; realized maps come from the rows themselves.
    pub fn from_rows(rows: impl IntoIterator<Item = (NaiveDate, SignalRow)>, control_names: Vec<String>) -> Result<Self> {
        let mut by_date: BTreeMap<NaiveDate, Vec<SignalRow>> = BTreeMap::new();
        for (d, r) in rows {
            if r.controls.len() != control_names.len() {
                return Err(Error::Shape {
                    op: "SignalPanel",
                    detail: format!("stock {} on {d}: {} controls, expected {}", r.stock_id, r.controls.len(), control_names.len()),
                });
            }
            by_date.entry(d).or_default().push(r);
        }
        let mut periods = Vec::with_capacity(by_date.len());
        let mut realized = Vec::with_capacity(by_date.len());
        for (date, mut rows) in by_date {
            rows.sort_by_key(|r| r.stock_id);
            if let Some(w) = rows.windows(2).find(|w| w[0].stock_id == w[1].stock_id) {
                return Err(Error::Invalid(format!("stock {} appears twice on {date}", w[0].stock_id)));
            }
            realized.push(rows.iter().map(|r| (r.stock_id, r.realized)).collect());
            periods.push(CrossSection { date, rows });
        }
        Ok(Self { periods, control_names, realized })
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuintileSort {
    /// Stock ids per group, lowest predictions first.
    pub groups: Vec<Vec<i64>>,
    pub long_short: f64,
}

/// `(stock_id, prediction, realized)` triples for one period.
pub fn quintile_sort(cross: &[(i64, f64, f64)]) -> Result<QuintileSort> {
    let n = cross.len();
    if n < 5 {
        return Err(Error::Insufficient(format!("{n} stocks, need at least 5 to form quintiles")));
    }
    if let Some(c) = cross.iter().find(|c| !c.1.is_finite() || !c.2.is_finite()) {
        return Err(Error::Domain(format!("non-finite prediction or return for stock {}", c.0)));
    }
    let mut order: Vec<&(i64, f64, f64)> = cross.iter().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let (base, extra) = (n / 5, n % 5);
    let mut groups = Vec::with_capacity(5);
    let mut means = Vec::with_capacity(5);
    let mut start = 0;
    for g in 0..5 {
        let size = base + usize::from(g < extra);
        let members = &order[start..start + size];
        groups.push(members.iter().map(|c| c.0).collect());
        means.push(members.iter().map(|c| c.2).sum::<f64>() / size as f64);
        start += size;
    }
    Ok(QuintileSort { groups, long_short: means[4] - means[0] })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongShortSeries {
    /// Period labels of the panel the series was formed from.
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
    pub periods_per_year: f64,
}

/// Portfolios formed on period `t` signals and held over period `t+k−1`.
/// Stocks without a realized return at the holding period are left out of
/// the sort; periods with fewer than five remaining stocks are skipped with
/// a warning, and formation periods past the end of the calendar are dropped.
pub fn delayed_series(panel: &SignalPanel, k: usize, periods_per_year: f64) -> Result<(LongShortSeries, Vec<String>)> {
    if k == 0 {
        return Err(Error::Invalid("delay k must be at least 1".into()));
    }
    let mut series = LongShortSeries { dates: Vec::new(), returns: Vec::new(), periods_per_year };
    let mut warnings = Vec::new();
    for (p, cs) in panel.periods.iter().enumerate() {
        let Some(held) = panel.realized.get(p + k - 1) else { break };
        let cross: Vec<(i64, f64, f64)> = cs
            .rows
            .iter()
            .filter_map(|r| held.get(&r.stock_id).map(|&ret| (r.stock_id, r.signal, ret)))
            .collect();
        if cross.is_empty() {
            continue;
        }
        match quintile_sort(&cross) {
            Ok(q) => {
                series.dates.push(cs.date);
                series.returns.push(q.long_short);
            }
            Err(Error::Insufficient(m)) => warnings.push(format!("{}: skipped, {m}", cs.date)),
            Err(e) => return Err(e),
        }
    }
    Ok((series, warnings))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub periods: usize,
    pub mean: f64,
    /// Annualized mean.
    pub ar: f64,
    /// `None` when the series has zero variance.
    pub t_stat: Option<f64>,
    pub sharpe: Option<f64>,
}

/// Annualized return, t-statistic of the mean, and Sharpe ratio against the
/// optional per-period risk-free series (zero when absent).
pub fn performance(series: &LongShortSeries, risk_free: Option<&[f64]>) -> Result<Performance> {
    let r = &series.returns;
    let t = r.len();
    if t < 2 {
        return Err(Error::Insufficient(format!("{t} periods, need at least 2")));
    }
    let mean = r.iter().sum::<f64>() / t as f64;
    let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64).sqrt();
    let excess_mean = match risk_free {
        Some(rf) if rf.len() != t => {
            return Err(Error::Shape { op: "performance", detail: format!("{} risk-free values for {t} periods", rf.len()) })
        }
        Some(rf) => mean - rf.iter().sum::<f64>() / t as f64,
        None => mean,
    };
    let ok = r.iter().any(|v| *v != r[0]) && sd > 0.0;
    Ok(Performance {
        periods: t,
        mean,
        ar: mean * series.periods_per_year,
        t_stat: ok.then(|| mean / (sd / (t as f64).sqrt())),
        sharpe: ok.then(|| excess_mean / sd * series.periods_per_year.sqrt()),
    })
}

/// Five-factor returns for one period, as fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub date: NaiveDate,
    pub mktrf: f64,
    pub smb: f64,
    pub hml: f64,
    pub rmw: f64,
    pub cma: f64,
    pub rf: f64,
}

impl FactorRow {
    pub const NAMES: [&'static str; 5] = ["mktrf", "smb", "hml", "rmw", "cma"];

    fn values(&self) -> [f64; 5] {
        [self.mktrf, self.smb, self.hml, self.rmw, self.cma]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorAlpha {
    /// Annualized intercept.
    pub alpha: f64,
    pub t_stat: Option<f64>,
    /// Loadings keyed by factor name; identically-zero factors are absent.
    pub loadings: BTreeMap<String, f64>,
    pub periods: usize,
}

/// Regresses the long-short series on an intercept and the five factors,
/// matched by date. Factors that are zero on every matched date carry no
/// information and are dropped; any other rank deficiency is an error.
pub fn factor_alpha(series: &LongShortSeries, factors: &[FactorRow]) -> Result<FactorAlpha> {
    let by_date: BTreeMap<NaiveDate, &FactorRow> = factors.iter().map(|f| (f.date, f)).collect();
    let mut rows = Vec::with_capacity(series.returns.len());
    for (d, r) in series.dates.iter().zip(&series.returns) {
        let f = by_date
            .get(d)
            .ok_or_else(|| Error::Invalid(format!("no factor returns for {d}")))?;
        rows.push((*r, f.values()));
    }
    let keep: Vec<usize> = (0..5).filter(|&j| rows.iter().any(|(_, f)| f[j] != 0.0)).collect();
    let n = rows.len();
    let k = keep.len() + 1;
    if n <= k {
        return Err(Error::Insufficient(format!("{n} periods for {k} regressors")));
    }
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { rows[i].1[keep[j - 1]] });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.0));
    let fit = ols(&x, &y)?;
    let se = fit.hc1_se(&x);
    Ok(FactorAlpha {
        alpha: fit.coefficients[0] * series.periods_per_year,
        t_stat: (se[0] > 0.0).then(|| fit.coefficients[0] / se[0]),
        loadings: keep
            .iter()
            .enumerate()
            .map(|(i, &j)| (FactorRow::NAMES[j].to_string(), fit.coefficients[i + 1]))
            .collect(),
        periods: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn date(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    #[test]
    fn five_stocks_rank_returns() {
        let cross: Vec<(i64, f64, f64)> = (0..5).map(|i| (i as i64, i as f64, 0.01 * (i + 1) as f64)).collect();
        let q = quintile_sort(&cross).unwrap();
        assert!((q.long_short - 0.04).abs() < 1e-15);
        assert!(q.groups.iter().all(|g| g.len() == 1));
    }

    #[test]
    fn ties_break_by_stock_id() {
        let cross: Vec<(i64, f64, f64)> = [9, 3, 7, 1, 5].iter().map(|&s| (s, 0.0, s as f64)).collect();
        let q = quintile_sort(&cross).unwrap();
        assert_eq!(q.groups, vec![vec![1], vec![3], vec![5], vec![7], vec![9]]);
        assert_eq!(q.long_short, 8.0);
    }

    #[test]
    fn fewer_than_five_is_insufficient() {
        let cross = [(1, 0.0, 0.0); 4];
        assert!(matches!(quintile_sort(&cross), Err(Error::Insufficient(_))));
    }

    #[test]
    fn performance_examples() {
        let s = LongShortSeries { dates: (0..10).map(date).collect(), returns: vec![0.0004; 10], periods_per_year: 252.0 };
        let p = performance(&s, None).unwrap();
        assert!((p.ar - 0.1008).abs() < 1e-12);
        assert_eq!(p.sharpe, None);
        let s = LongShortSeries { dates: (0..4).map(date).collect(), returns: vec![0.01, -0.01, 0.01, -0.01], periods_per_year: 252.0 };
        let p = performance(&s, None).unwrap();
        assert_eq!((p.ar, p.t_stat), (0.0, Some(0.0)));
    }

    fn factors_from(mkt: &[f64]) -> Vec<FactorRow> {
        mkt.iter()
            .enumerate()
            .map(|(i, &m)| FactorRow { date: date(i), mktrf: m, smb: 0.0, hml: 0.0, rmw: 0.0, cma: 0.0, rf: 0.0 })
            .collect()
    }

    #[test]
    fn alpha_with_zero_factors_is_mean() {
        let r = vec![0.01, 0.03, -0.02, 0.04];
        let s = LongShortSeries { dates: (0..4).map(date).collect(), returns: r.clone(), periods_per_year: 252.0 };
        let a = factor_alpha(&s, &factors_from(&[0.0; 4])).unwrap();
        let p = performance(&s, None).unwrap();
        assert!((a.alpha - p.ar).abs() < 1e-14);
        assert!(a.loadings.is_empty());
    }

    #[test]
    fn pure_loading_has_zero_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mkt: Vec<f64> = (0..50).map(|_| Normal::new(0.0, 0.01).unwrap().sample(&mut rng)).collect();
        let s = LongShortSeries { dates: (0..50).map(date).collect(), returns: mkt.iter().map(|m| 0.5 * m).collect(), periods_per_year: 252.0 };
        let a = factor_alpha(&s, &factors_from(&mkt)).unwrap();
        assert!(a.alpha.abs() < 1e-12);
        assert!((a.loadings["mktrf"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn planted_alpha_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = Normal::new(0.0, 0.01).unwrap();
        let t = 1000;
        let mkt: Vec<f64> = (0..t).map(|_| n.sample(&mut rng)).collect();
        let ls: Vec<f64> = mkt.iter().map(|m| 0.0002 + 0.3 * m + n.sample(&mut rng)).collect();
        let s = LongShortSeries { dates: (0..t).map(date).collect(), returns: ls, periods_per_year: 252.0 };
        let a = factor_alpha(&s, &factors_from(&mkt)).unwrap();
        let se = (a.alpha / 252.0) / a.t_stat.unwrap() * 252.0;
        assert!((a.alpha - 0.0002 * 252.0).abs() < 2.0 * se, "{} ± {se}", a.alpha);
    }

    #[test]
    fn missing_factor_date_is_error() {
        let s = LongShortSeries { dates: vec![date(0), date(9)], returns: vec![0.0, 0.0], periods_per_year: 252.0 };
        assert!(factor_alpha(&s, &factors_from(&[0.0])).is_err());
    }

    fn panel(periods: usize, stocks: i64, f: impl Fn(usize, i64) -> (f64, f64)) -> SignalPanel {
        let rows = (0..periods).flat_map(|p| {
            let f = &f;
            (0..stocks).map(move |s| {
                let (sig, ret) = f(p, s);
                (date(p), SignalRow { stock_id: s, signal: sig, realized: ret, controls: vec![] })
            })
        });
        SignalPanel::from_rows(rows.collect::<Vec<_>>(), vec![]).unwrap()
    }

    #[test]
    fn delay_one_is_the_plain_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 1.0).unwrap();
        let draws: Vec<Vec<(f64, f64)>> = (0..20).map(|_| (0..13).map(|_| (n.sample(&mut rng), n.sample(&mut rng))).collect()).collect();
        let pn = panel(20, 13, |p, s| draws[p][s as usize]);
        let (s, w) = delayed_series(&pn, 1, 252.0).unwrap();
        assert!(w.is_empty());
        for (p, cs) in pn.periods.iter().enumerate() {
            let cross: Vec<_> = cs.rows.iter().map(|r| (r.stock_id, r.signal, r.realized)).collect();
            assert_eq!(s.returns[p], quintile_sort(&cross).unwrap().long_short);
        }
    }

    #[test]
    fn lagged_signal_is_found_by_matching_delay() {
        // Signal at t predicts the return two periods later.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = Normal::new(0.0, 1.0).unwrap();
        let sig: Vec<Vec<f64>> = (0..80).map(|_| (0..50).map(|_| n.sample(&mut rng)).collect()).collect();
        let noise: Vec<Vec<f64>> = (0..80).map(|_| (0..50).map(|_| n.sample(&mut rng)).collect()).collect();
        let pn = panel(80, 50, |p, s| {
            let lead = if p >= 2 { 0.5 * sig[p - 2][s as usize] } else { 0.0 };
            (sig[p][s as usize], lead + noise[p][s as usize])
        });
        let m1 = performance(&delayed_series(&pn, 1, 252.0).unwrap().0, None).unwrap().mean;
        let (s3, _) = delayed_series(&pn, 3, 252.0).unwrap();
        assert_eq!(s3.returns.len(), 78);
        let m3 = performance(&s3, None).unwrap().mean;
        assert!(m3 > m1 + 0.5, "{m3} vs {m1}");
    }

    #[test]
    fn duplicate_stock_rejected() {
        let r = SignalRow { stock_id: 1, signal: 0.0, realized: 0.0, controls: vec![] };
        assert!(SignalPanel::from_rows(vec![(date(0), r.clone()), (date(0), r)], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn groups_partition_with_exact_sizes(n in 5usize..60, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Normal::new(0.0, 1.0).unwrap();
            let cross: Vec<(i64, f64, f64)> = (0..n).map(|i| (i as i64, u.sample(&mut rng), u.sample(&mut rng))).collect();
            let q = quintile_sort(&cross).unwrap();
            let mut all: Vec<i64> = q.groups.iter().flatten().copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..n as i64).collect::<Vec<_>>());
            for (g, members) in q.groups.iter().enumerate() {
                prop_assert_eq!(members.len(), n / 5 + usize::from(g < n % 5));
            }
        }

        #[test]
        fn monotone_transform_invariance(n in 5usize..40, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Normal::new(0.0, 1.0).unwrap();
            let cross: Vec<(i64, f64, f64)> = (0..n).map(|i| (i as i64, u.sample(&mut rng), u.sample(&mut rng))).collect();
            let moved: Vec<(i64, f64, f64)> = cross.iter().map(|&(s, p, r)| (s, (3.0 * p).exp() + 7.0, r)).collect();
            prop_assert_eq!(quintile_sort(&cross).unwrap(), quintile_sort(&moved).unwrap());
        }
    }
}
