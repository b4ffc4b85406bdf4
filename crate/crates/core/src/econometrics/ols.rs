use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares fit of `y` on the columns of `x` (include a ones column for
/// an intercept).
#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    /// (X'X)⁻¹, kept for sandwich estimators.
    pub xtx_inv: DMatrix<f64>,
}

/// Relative pivot floor below which the design is treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Shape { op: "ols", detail: format!("{n} design rows, {} responses", y.len()) });
    }
    if n < k {
        return Err(Error::Insufficient(format!("{n} observations for {k} regressors")));
    }
    let xtx = x.transpose() * x;
    let scale = xtx.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let qr = x.clone().qr();
    let r = qr.r();
    if scale == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * scale.sqrt() * (n as f64).sqrt()) {
        return Err(Error::Singular(format!("{k} regressors are linearly dependent")));
    }
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let xtx_inv = xtx.try_inverse().ok_or_else(|| Error::Singular("X'X not invertible".into()))?;
    let fitted = x * &beta;
    let resid = y - fitted;
    let ybar = y.mean();
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let rss = resid.norm_squared();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };
    let dof = n as f64 - k as f64;
    let adj_r2 = if dof > 0.0 && tss > 0.0 { 1.0 - (rss / dof) / (tss / (n as f64 - 1.0)) } else { f64::NAN };
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        residuals: resid.iter().copied().collect(),
        r2,
        adj_r2,
        xtx_inv,
    })
}

impl OlsFit {
    /// HC1 heteroskedasticity-robust standard errors.
    pub fn hc1_se(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let (n, k) = x.shape();
        let mut meat = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            let row = x.row(i).transpose();
            meat += &row * row.transpose() * self.residuals[i].powi(2);
        }
        let v = &self.xtx_inv * meat * &self.xtx_inv * (n as f64 / (n as f64 - k as f64));
        (0..k).map(|j| v[(j, j)].max(0.0).sqrt()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_regression_matches_closed_form() {
        let xs = [1.0, 2.0, 4.0, 7.0, 8.0];
        let ys = [2.0, 2.5, 5.0, 8.0, 7.5];
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let fit = ols(&x, &DVector::from_column_slice(&ys)).unwrap();
        let mx = xs.iter().sum::<f64>() / 5.0;
        let my = ys.iter().sum::<f64>() / 5.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((fit.coefficients[1] - slope).abs() < 1e-12);
        assert!((fit.coefficients[0] - (my - slope * mx)).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_is_singular() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        let y = DVector::from_fn(6, |i, _| i as f64);
        assert!(matches!(ols(&x, &y), Err(Error::Singular(_))));
    }

    #[test]
    fn hc1_matches_hand_formula_for_mean() {
        // Intercept-only: HC1 variance = Σe² / (n(n−1)).
        let ys = [1.0, 3.0, 2.0, 6.0];
        let x = DMatrix::from_element(4, 1, 1.0);
        let fit = ols(&x, &DVector::from_column_slice(&ys)).unwrap();
        let m = 3.0;
        let ss: f64 = ys.iter().map(|v| (v - m).powi(2)).sum();
        assert!((fit.hc1_se(&x)[0] - (ss / 12.0).sqrt()).abs() < 1e-12);
    }
}
