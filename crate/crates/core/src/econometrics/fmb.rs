use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ols::ols;
use super::portfolio::SignalPanel;
use crate::error::{Error, Result};

pub const DEFAULT_NW_LAGS: usize = 11;

/// Newey–West standard error of the mean of `x` with Bartlett weights
/// `1 − j/(lags+1)` and autocovariances normalized by T.
pub fn newey_west_se(x: &[f64], lags: usize) -> Result<f64> {
    let t = x.len();
    if t <= lags {
        return Err(Error::Insufficient(format!("{t} observations for {lags} lags")));
    }
    let mean = x.iter().sum::<f64>() / t as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma = |j: usize| d[j..].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / t as f64;
    let mut s = gamma(0);
    for j in 1..=lags {
        s += 2.0 * (1.0 - j as f64 / (lags as f64 + 1.0)) * gamma(j);
    }
    Ok((s.max(0.0) / t as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmCoefficient {
    pub name: String,
    pub mean: f64,
    pub se: f64,
    /// `None` when the coefficient series is constant.
    pub t_stat: Option<f64>,
    pub periods: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmResult {
    /// Intercept first, then the signal, then controls.
    pub coefficients: Vec<FmCoefficient>,
    pub periods: usize,
    pub avg_adj_r2: f64,
    pub lags: usize,
    pub warnings: Vec<String>,
}

struct PeriodFit {
    betas: Vec<Option<f64>>,
    adj_r2: f64,
    warnings: Vec<String>,
}

fn standardize(col: &mut [f64]) {
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    col.iter_mut().for_each(|v| *v = (*v - m) / sd);
}

fn fit_period(panel: &SignalPanel, p: usize, standardize_cols: bool) -> Result<PeriodFit> {
    let cs = &panel.periods[p];
    let k = 1 + panel.control_names.len();
    let rows: Vec<(f64, Vec<f64>)> = cs
        .rows
        .iter()
        .filter_map(|r| {
            let ctl: Option<Vec<f64>> = r.controls.iter().copied().collect();
            ctl.map(|c| (r.realized, std::iter::once(r.signal).chain(c).collect()))
        })
        .collect();
    let mut warnings = Vec::new();
    let n = rows.len();
    if n <= k + 1 {
        warnings.push(format!("{}: skipped, {n} complete rows for {} regressors", cs.date, k + 1));
        return Ok(PeriodFit { betas: vec![None; k + 1], adj_r2: f64::NAN, warnings });
    }
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| rows.iter().map(|r| r.1[j]).collect()).collect();
    let live: Vec<usize> = (0..k)
        .filter(|&j| {
            let c = &cols[j];
            let varies = c.iter().any(|v| *v != c[0]);
            if !varies {
                warnings.push(format!("{}: regressor {j} is constant, coefficient dropped", cs.date));
            }
            varies
        })
        .collect();
    if standardize_cols {
        for &j in &live {
            standardize(&mut cols[j]);
        }
    }
    let x = DMatrix::from_fn(n, live.len() + 1, |i, c| if c == 0 { 1.0 } else { cols[live[c - 1]][i] });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.0));
    let fit = ols(&x, &y)?;
    let mut betas = vec![None; k + 1];
    betas[0] = Some(fit.coefficients[0]);
    for (c, &j) in live.iter().enumerate() {
        betas[j + 1] = Some(fit.coefficients[c + 1]);
    }
    Ok(PeriodFit { betas, adj_r2: fit.adj_r2, warnings })
}

/// Per-period cross-sectional OLS of realized returns on an intercept, the
/// signal and any controls, followed by time-series means of the
/// coefficients with Newey–West errors. Rows missing a control are left out
/// of their period's regression.
pub fn fama_macbeth(panel: &SignalPanel, standardize: bool, lags: usize) -> Result<FmResult> {
    let fits: Vec<Result<PeriodFit>> = (0..panel.len()).into_par_iter().map(|p| fit_period(panel, p, standardize)).collect();
    let names: Vec<String> = ["intercept".to_string(), "signal".to_string()]
        .into_iter()
        .chain(panel.control_names.iter().cloned())
        .collect();
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut r2 = Vec::new();
    let mut warnings = Vec::new();
    let mut used = 0;
    for f in fits {
        let f = f?;
        warnings.extend(f.warnings);
        if f.betas[0].is_none() {
            continue;
        }
        used += 1;
        if f.adj_r2.is_finite() {
            r2.push(f.adj_r2);
        }
        for (s, b) in series.iter_mut().zip(&f.betas) {
            if let Some(b) = b {
                s.push(*b);
            }
        }
    }
    if used == 0 {
        return Err(Error::Insufficient("no period has enough observations for a cross-sectional regression".into()));
    }
    let mut coefficients = Vec::with_capacity(names.len());
    for (name, s) in names.into_iter().zip(series) {
        if s.is_empty() {
            return Err(Error::Insufficient(format!("coefficient `{name}` is undefined in every period")));
        }
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let se = newey_west_se(&s, lags)?;
        coefficients.push(FmCoefficient { name, mean, se, t_stat: (se > 0.0).then(|| mean / se), periods: s.len() });
    }
    Ok(FmResult {
        coefficients,
        periods: used,
        avg_adj_r2: if r2.is_empty() { f64::NAN } else { r2.iter().sum::<f64>() / r2.len() as f64 },
        lags,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::portfolio::SignalRow;
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn nw_hand_values() {
        assert!((newey_west_se(&[1.0, 2.0, 3.0, 4.0], 0).unwrap() - (1.25f64 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(newey_west_se(&[3.0; 10], 4).unwrap(), 0.0);
        assert!(newey_west_se(&[1.0, 2.0], 2).is_err());
    }

    fn row(s: i64, signal: f64, realized: f64) -> SignalRow {
        SignalRow { stock_id: s, signal, realized, controls: vec![] }
    }

    fn date(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    #[test]
    fn exact_linear_relation() {
        let rows = (0..5).flat_map(|p| (0..8).map(move |s| (date(p), row(s, (s * (p as i64 + 1)) as f64, 2.0 * (s * (p as i64 + 1)) as f64))));
        let pn = SignalPanel::from_rows(rows.collect::<Vec<_>>(), vec![]).unwrap();
        let fm = fama_macbeth(&pn, false, 2).unwrap();
        assert!((fm.coefficients[1].mean - 2.0).abs() < 1e-12);
        assert!(fm.coefficients[1].se < 1e-12);
    }

    #[test]
    fn single_period_equals_ols() {
        let xs = [0.3, -1.2, 2.2, 0.8, 1.5, -0.4];
        let ys = [0.1, -0.5, 1.3, 0.2, 0.9, 0.0];
        let rows: Vec<_> = (0..6).map(|i| (date(0), row(i as i64, xs[i], ys[i]))).collect();
        let pn = SignalPanel::from_rows(rows, vec![]).unwrap();
        let fm = fama_macbeth(&pn, false, 0).unwrap();
        let mx = xs.iter().sum::<f64>() / 6.0;
        let my = ys.iter().sum::<f64>() / 6.0;
        let slope = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / xs.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        assert!((fm.coefficients[1].mean - slope).abs() < 1e-12);
        assert!((fm.coefficients[0].mean - (my - slope * mx)).abs() < 1e-12);
        assert_eq!(fm.periods, 1);
    }

    #[test]
    fn constant_signal_period_is_dropped_for_that_coefficient() {
        let mut rows: Vec<_> = (0..6).map(|s| (date(0), row(s, 1.0, s as f64))).collect();
        for p in 1..4 {
            rows.extend((0..6).map(|s| (date(p), row(s, s as f64, s as f64 * 0.5))));
        }
        let pn = SignalPanel::from_rows(rows, vec![]).unwrap();
        let fm = fama_macbeth(&pn, true, 0).unwrap();
        assert_eq!(fm.coefficients[1].periods, 3);
        assert_eq!(fm.coefficients[0].periods, 4);
        assert!(fm.warnings.iter().any(|w| w.contains("constant")));
    }

    #[test]
    fn standardized_signal_has_unit_scale() {
        // y = 3·x; after standardizing x the slope is 3·sd(x).
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let rows: Vec<_> = (0..5).map(|i| (date(0), row(i as i64, xs[i], 3.0 * xs[i]))).collect();
        let pn = SignalPanel::from_rows(rows, vec![]).unwrap();
        let fm = fama_macbeth(&pn, true, 0).unwrap();
        let m = xs.iter().sum::<f64>() / 5.0;
        let sd = (xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((fm.coefficients[1].mean - 3.0 * sd).abs() < 1e-12);
    }

    #[test]
    fn noise_signal_is_rarely_significant() {
        let mut rejections = 0;
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, 1.0).unwrap();
            let rows: Vec<_> = (0..60)
                .flat_map(|p| (0..30).map(move |s| (p, s)))
                .map(|(p, s)| (date(p), row(s, n.sample(&mut rng), n.sample(&mut rng))))
                .collect();
            let pn = SignalPanel::from_rows(rows, vec![]).unwrap();
            let fm = fama_macbeth(&pn, true, 2).unwrap();
            rejections += usize::from(fm.coefficients[1].t_stat.unwrap().abs() > 2.0);
        }
        assert!(rejections <= 6, "{rejections}/40");
    }
}
