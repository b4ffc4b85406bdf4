use super::{Matrix, Tape, Var};
use crate::error::Result;

/// Denominator floor in [`relative_error`]; keeps coordinates whose true
/// gradient is (near) zero from dividing finite-difference noise by ~0.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, REL_ERR_FLOOR)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// `(f(x + εe_i) − f(x − εe_i)) / 2ε` for scalar `f` evaluated by `eval`.
pub fn central_difference(mut eval: impl FnMut(&Matrix) -> Result<f64>, point: &Matrix, i: usize, eps: f64) -> Result<f64> {
    let mut plus = point.clone();
    plus.data_mut()[i] += eps;
    let mut minus = point.clone();
    minus.data_mut()[i] -= eps;
    Ok((eval(&plus)? - eval(&minus)?) / (2.0 * eps))
}

/// Largest per-coordinate relative error between the tape gradient of `f` at
/// `point` and central finite differences with step `eps`.
pub fn grad_check<F>(f: &F, point: &Matrix, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var> + ?Sized,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let out = f(&mut tape, x)?;
    let grads = tape.backward(out)?;
    let analytic = grads.wrt(&tape, x);

    let eval = |p: &Matrix| -> Result<f64> {
        let mut t = Tape::new();
        let x = t.leaf(p.clone());
        let out = f(&mut t, x)?;
        Ok(t.value(out).item())
    };

    let mut worst: f64 = 0.0;
    for i in 0..point.data().len() {
        let numeric = central_difference(eval, point, i, eps)?;
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}
