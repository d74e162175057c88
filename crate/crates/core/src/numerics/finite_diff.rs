//! Central finite differences, the independent oracle every analytic
//! gradient in this crate is checked against.

use crate::error::{Error, Result};

/// Central-difference gradient `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` per
/// coordinate. `f` may fail; failures and non-finite values propagate.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidInput(format!("finite_diff_grad: step h={h} must be positive")));
    }
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe)?;
        probe[i] = x[i] - h;
        let minus = f(&probe)?;
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::InvalidInput(format!(
                "finite_diff_grad: non-finite objective at coordinate {i} (f+={plus}, f-={minus})"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Relative error between an analytic and a numeric gradient entry, with an
/// absolute floor of 1e-4 on the denominator so that entries near zero are
/// compared absolutely (central differences carry ~1e-10 round-off there,
/// which would otherwise dominate the ratio).
pub fn grad_rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Maximum [`grad_rel_err`] across two gradients of equal length.
pub fn max_grad_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| grad_rel_err(a, n))
        .fold(0.0, f64::max)
}
