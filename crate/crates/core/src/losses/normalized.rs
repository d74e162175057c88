//! Normalized and asymmetric robust baselines.
//!
//! Closed forms (per sample, averaged over the batch):
//! - `nce`:  (−log p_t) / (−Σ_j log p_j)
//! - `ngce`: (1 − p_t^q) / (k − Σ_j p_j^q)
//! - `agce`: ((a+1)^q − (a + p_t)^q) / q
//!
//! Powers of probabilities are computed as `exp(q·log_softmax)` so they stay
//! accurate for very small probabilities. Each normalized loss guards its
//! denominator and reports a degeneracy error rather than dividing by ~0.

use crate::error::{Error, Result};
use crate::losses::{lsm_and_probs, validate_targets, BatchLossResult, LossSpec};
use crate::numerics::Matrix;

/// Denominators with absolute value below this are treated as degenerate.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Normalized cross entropy.
pub fn nce_loss(logits: &Matrix, targets: &[usize]) -> Result<BatchLossResult> {
    let k = logits.cols();
    validate_targets(targets, k, logits.rows())?;
    let (lsm, probs) = lsm_and_probs(logits)?;
    let n = logits.rows();
    let inv_n = 1.0 / n as f64;
    let mut loss_sum = 0.0;
    let mut grad = Matrix::zeros(n, k);
    for (r, &t) in targets.iter().enumerate() {
        let lsm_row = lsm.row(r);
        let p_row = probs.row(r);
        let u = -lsm_row[t];
        let d: f64 = -lsm_row.iter().sum::<f64>();
        if d.abs() < DEGENERACY_EPS {
            return Err(Error::NumericDegeneracy(format!(
                "nce denominator {d:e} at batch row {r}"
            )));
        }
        loss_sum += u / d;
        let inv_d2 = 1.0 / (d * d);
        let grad_row = grad.row_mut(r);
        for a in 0..k {
            let delta = if a == t { 1.0 } else { 0.0 };
            let du = p_row[a] - delta;
            let dd = k as f64 * p_row[a] - 1.0;
            grad_row[a] = (du * d - u * dd) * inv_d2 * inv_n;
        }
    }
    Ok(BatchLossResult {
        loss: loss_sum * inv_n,
        grad_logits: grad,
        eta_hat: None,
        abstain_rate_argmax: 0.0,
    })
}

/// Normalized generalized cross entropy with exponent `q`.
pub fn ngce_loss(logits: &Matrix, targets: &[usize], spec: &LossSpec) -> Result<BatchLossResult> {
    let k = logits.cols();
    validate_targets(targets, k, logits.rows())?;
    let q = spec.q.ok_or_else(|| Error::InvalidConfig("ngce requires `q`".to_string()))?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidConfig(format!("q must be > 0, got {q}")));
    }
    let (lsm, probs) = lsm_and_probs(logits)?;
    let n = logits.rows();
    let inv_n = 1.0 / n as f64;
    let mut loss_sum = 0.0;
    let mut grad = Matrix::zeros(n, k);
    for (r, &t) in targets.iter().enumerate() {
        let lsm_row = lsm.row(r);
        let p_row = probs.row(r);
        let pq: Vec<f64> = lsm_row.iter().map(|&l| (q * l).exp()).collect();
        let s: f64 = pq.iter().sum();
        let u = 1.0 - pq[t];
        let d = k as f64 - s;
        if d.abs() < DEGENERACY_EPS {
            return Err(Error::NumericDegeneracy(format!(
                "ngce denominator {d:e} at batch row {r}"
            )));
        }
        loss_sum += u / d;
        let inv_d2 = 1.0 / (d * d);
        let grad_row = grad.row_mut(r);
        for a in 0..k {
            let delta = if a == t { 1.0 } else { 0.0 };
            let du = -q * pq[t] * (delta - p_row[a]);
            let dd = -q * (pq[a] - p_row[a] * s);
            grad_row[a] = (du * d - u * dd) * inv_d2 * inv_n;
        }
    }
    Ok(BatchLossResult {
        loss: loss_sum * inv_n,
        grad_logits: grad,
        eta_hat: None,
        abstain_rate_argmax: 0.0,
    })
}

/// Asymmetric generalized cross entropy with exponent `q` and shift `a`.
pub fn agce_loss(logits: &Matrix, targets: &[usize], spec: &LossSpec) -> Result<BatchLossResult> {
    let k = logits.cols();
    validate_targets(targets, k, logits.rows())?;
    let q = spec.q.ok_or_else(|| Error::InvalidConfig("agce requires `q`".to_string()))?;
    let shift = spec.a.ok_or_else(|| Error::InvalidConfig("agce requires `a`".to_string()))?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidConfig(format!("q must be > 0, got {q}")));
    }
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(Error::InvalidConfig(format!("a must be > 0, got {shift}")));
    }
    let (_lsm, probs) = lsm_and_probs(logits)?;
    let n = logits.rows();
    let inv_n = 1.0 / n as f64;
    let lead = (shift + 1.0).powf(q);
    let mut loss_sum = 0.0;
    let mut grad = Matrix::zeros(n, k);
    for (r, &t) in targets.iter().enumerate() {
        let p_row = probs.row(r);
        let p_t = p_row[t];
        loss_sum += (lead - (shift + p_t).powf(q)) / q;
        // dL/dz_a = −(a + p_t)^(q−1) · p_t · (δ_at − p_a).
        let factor = -(shift + p_t).powf(q - 1.0) * p_t * inv_n;
        let grad_row = grad.row_mut(r);
        for a in 0..k {
            let delta = if a == t { 1.0 } else { 0.0 };
            grad_row[a] = factor * (delta - p_row[a]);
        }
    }
    Ok(BatchLossResult {
        loss: loss_sum * inv_n,
        grad_logits: grad,
        eta_hat: None,
        abstain_rate_argmax: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, max_grad_rel_err, Rng};

    fn random_batch(rng: &mut Rng, n: usize, m: usize) -> Matrix {
        Matrix::from_vec(n, m, (0..n * m).map(|_| rng.uniform_in(-3.0, 3.0)).collect()).unwrap()
    }

    fn fd_check<F>(loss: F, logits: &Matrix, analytic: &Matrix) -> f64
    where
        F: Fn(&Matrix) -> Result<f64>,
    {
        let numeric = finite_diff_grad(
            |flat| loss(&Matrix::from_vec(logits.rows(), logits.cols(), flat.to_vec())?),
            logits.data(),
            1e-5,
        )
        .unwrap();
        max_grad_rel_err(analytic.data(), &numeric)
    }

    #[test]
    fn nce_uniform_two_class_prediction_is_one_half() {
        let logits = Matrix::from_rows(&[&[0.0, 0.0]]).unwrap();
        let res = nce_loss(&logits, &[0]).unwrap();
        assert!((res.loss - 0.5).abs() < 1e-15, "loss {}", res.loss);
    }

    #[test]
    fn agce_is_zero_for_a_perfect_prediction() {
        // Logits ±60 drive p_target to exactly 1.0 in f64.
        let logits = Matrix::from_rows(&[&[60.0, -60.0]]).unwrap();
        for (q, a) in [(1.0, 0.25), (0.5, 1.25), (2.0, 0.75)] {
            let res = agce_loss(&logits, &[0], &LossSpec::agce(q, a)).unwrap();
            assert_eq!(res.loss, 0.0, "q={q} a={a}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(5150);
        for &(n, k) in &[(1usize, 2usize), (6, 4)] {
            let logits = random_batch(&mut rng, n, k);
            let targets: Vec<usize> = (0..n).map(|_| rng.below(k as u64) as usize).collect();

            let res = nce_loss(&logits, &targets).unwrap();
            let err = fd_check(|m| Ok(nce_loss(m, &targets)?.loss), &logits, &res.grad_logits);
            assert!(err < 1e-6, "nce n={n} k={k}: {err}");

            for q in [0.25, 0.75] {
                let spec = LossSpec::ngce(q);
                let res = ngce_loss(&logits, &targets, &spec).unwrap();
                let err =
                    fd_check(|m| Ok(ngce_loss(m, &targets, &spec)?.loss), &logits, &res.grad_logits);
                assert!(err < 1e-6, "ngce q={q} n={n} k={k}: {err}");
            }

            for (q, a) in [(0.25, 1.25), (1.25, 0.25)] {
                let spec = LossSpec::agce(q, a);
                let res = agce_loss(&logits, &targets, &spec).unwrap();
                let err =
                    fd_check(|m| Ok(agce_loss(m, &targets, &spec)?.loss), &logits, &res.grad_logits);
                assert!(err < 1e-6, "agce q={q} a={a} n={n} k={k}: {err}");
            }
        }
    }

    #[test]
    fn losses_are_finite_and_nonnegative_on_extreme_logits() {
        let logits = Matrix::from_rows(&[&[30.0, -30.0, 0.0], &[-30.0, -30.0, 30.0]]).unwrap();
        let targets = [1, 0];
        for res in [
            nce_loss(&logits, &targets).unwrap(),
            ngce_loss(&logits, &targets, &LossSpec::ngce(0.5)).unwrap(),
            agce_loss(&logits, &targets, &LossSpec::agce(0.5, 0.25)).unwrap(),
        ] {
            assert!(res.loss.is_finite() && res.loss >= 0.0, "loss {}", res.loss);
            assert!(res.grad_logits.is_finite());
        }
    }
}
