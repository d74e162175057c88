//! Numerically stable softmax and log-softmax.
//!
//! Both subtract the row maximum before exponentiating, so inputs of any
//! magnitude up to around ±1e6 neither overflow nor collapse the whole row.
//! Losses must take logs through [`log_softmax`] rather than `softmax().ln()`
//! to keep full precision for very small probabilities.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn check_input(logits: &[f64]) -> Result<()> {
    if logits.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "softmax needs at least 2 logits, got {}",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("softmax input contains a non-finite value".to_string()));
    }
    Ok(())
}

/// Softmax with max-subtraction. Outputs are strictly positive (tiny values
/// are floored at the smallest positive normal, which perturbs the row sum by
/// far less than 1e-12) and sum to 1 within 1e-12.
pub fn softmax_stable(logits: &[f64]) -> Result<Vec<f64>> {
    check_input(logits)?;
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
        if *v < f64::MIN_POSITIVE {
            *v = f64::MIN_POSITIVE;
        }
    }
    Ok(out)
}

/// Log-softmax: `z - max - ln(Σ exp(z - max))`, exact where softmax would
/// underflow.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_input(logits)?;
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|&z| z - max - lse).collect())
}

/// Row-wise [`softmax_stable`] over a logits batch.
pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let probs = softmax_stable(logits.row(r))?;
        out.row_mut(r).copy_from_slice(&probs);
    }
    Ok(out)
}

/// Row-wise [`log_softmax`] over a logits batch.
pub fn log_softmax_rows(logits: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let lsm = log_softmax(logits.row(r))?;
        out.row_mut(r).copy_from_slice(&lsm);
    }
    Ok(out)
}
