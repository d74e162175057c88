//! Abstaining objectives: the ramped log-barrier loss (`dac`), the informed
//! variant whose penalty pulls the batch abstention toward a supplied noise
//! estimate (`idac`), their shared warm-up objective, and inference-time
//! handling of the abstention column.
//!
//! Both abstaining losses share the same first term. Writing `g = 1 − p_abs`
//! (the total probability mass on the real classes) the per-sample term is
//!
//! ```text
//! F = g · (−log(p_target / g)) = g · (log g − log p_target)
//! ```
//!
//! which interpolates between plain cross entropy (`g → 1`) and zero
//! (`g → 0`, the sample is fully abstained). The `dac` loss adds a per-sample
//! barrier `−α·log g` that punishes abstention with a weight ramped over
//! training; the `idac` loss instead adds `α·(η̃ − η̂)²` once per batch, where
//! `η̂` is the batch mean of `p_abs` and `η̃` the external noise estimate.
//!
//! `g` is computed as the sum of the class probabilities (not `1 − p_abs`,
//! which loses precision when `p_abs ≈ 1`) and floored at [`ABSTAIN_EPS`]
//! inside logarithms and divisions. The floor acts as a clamp: where it is
//! active, its contribution to the gradient is zero.

use crate::error::{Error, Result};
use crate::losses::classic::ce_value_and_grad;
use crate::losses::{lsm_and_probs, validate_targets, BatchLossResult, LossSpec};
use crate::numerics::{softmax_rows, Matrix};

/// Floor for `1 − p_abs` inside logs and divisions.
pub const ABSTAIN_EPS: f64 = 1e-7;

fn require_abstain_column(logits: &Matrix) -> Result<usize> {
    // k real classes plus the abstention column means at least 3 outputs.
    if logits.cols() < 3 {
        return Err(Error::Shape(format!(
            "abstaining loss needs k+1 >= 3 logit columns, got {}",
            logits.cols()
        )));
    }
    Ok(logits.cols() - 1)
}

/// Batch mean of the abstention probability and the strict-argmax abstention
/// rate. A row counts as abstained only when its abstention probability is
/// strictly greater than every class probability, so ties never abstain.
pub fn abstention_stats(probs: &Matrix) -> (f64, f64) {
    let abstain_col = probs.cols() - 1;
    let n = probs.rows();
    let mut sum = 0.0;
    let mut abstained = 0usize;
    for r in 0..n {
        let row = probs.row(r);
        let p_abs = row[abstain_col];
        sum += p_abs;
        if row[..abstain_col].iter().all(|&p| p_abs > p) {
            abstained += 1;
        }
    }
    (sum / n as f64, abstained as f64 / n as f64)
}

/// Per-row abstention-weighted cross entropy `F` and its unscaled logits
/// gradient, shared by `dac` and `idac`. Returns `(Σ F_j, per-row g values,
/// dF/dlogits)`; the caller divides by N and adds its own penalty.
fn first_term(
    lsm: &Matrix,
    probs: &Matrix,
    targets: &[usize],
) -> (f64, Vec<f64>, Matrix) {
    let n = lsm.rows();
    let m = lsm.cols();
    let abstain_col = m - 1;
    let mut f_sum = 0.0;
    let mut gs = Vec::with_capacity(n);
    let mut grad = Matrix::zeros(n, m);
    for (r, &t) in targets.iter().enumerate() {
        let lsm_row = lsm.row(r);
        let p_row = probs.row(r);
        // Class mass; summing the class probabilities keeps precision when
        // the abstention probability is close to 1.
        let g: f64 = lsm_row[..abstain_col].iter().map(|&l| l.exp()).sum();
        let floored = g < ABSTAIN_EPS;
        let log_g = if floored { ABSTAIN_EPS.ln() } else { g.ln() };
        let c = log_g - lsm_row[t];
        f_sum += g * c;
        gs.push(g);

        // dF/dz_a = dg_a·(c + [g not floored]) − g·(δ_at − p_a)
        // with dg_a = p_a·(1[a < k] − g).
        let c_eff = if floored { c } else { c + 1.0 };
        let grad_row = grad.row_mut(r);
        for a in 0..m {
            let indicator = if a < abstain_col { 1.0 } else { 0.0 };
            let dg = p_row[a] * (indicator - g);
            let delta = if a == t { 1.0 } else { 0.0 };
            grad_row[a] = dg * c_eff - g * (delta - p_row[a]);
        }
    }
    (f_sum, gs, grad)
}

/// Abstention loss with a log-barrier penalty:
/// `mean_j [ F_j + α·log(1/g_j) ]`, with `α` supplied by the caller because
/// it ramps over training (see [`dac_alpha_at`]).
pub fn dac_loss(logits: &Matrix, targets: &[usize], alpha_current: f64) -> Result<BatchLossResult> {
    let k = require_abstain_column(logits)?;
    validate_targets(targets, k, logits.rows())?;
    if !(alpha_current >= 0.0 && alpha_current.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha_current}")));
    }
    let (lsm, probs) = lsm_and_probs(logits)?;
    let n = logits.rows();
    let inv_n = 1.0 / n as f64;

    let (f_sum, gs, mut grad) = first_term(&lsm, &probs, targets);

    let mut penalty_sum = 0.0;
    for (r, &g) in gs.iter().enumerate() {
        let floored = g < ABSTAIN_EPS;
        let log_g = if floored { ABSTAIN_EPS.ln() } else { g.ln() };
        penalty_sum += -alpha_current * log_g;
        if !floored {
            // d(−α log g)/dz_a = −(α/g)·dg_a; zero where the floor clamps.
            let scale = -alpha_current / g;
            let p_row_start = r; // row index into probs
            let grad_row = grad.row_mut(p_row_start);
            let abstain_col = grad_row.len() - 1;
            for (a, gr) in grad_row.iter_mut().enumerate() {
                let indicator = if a < abstain_col { 1.0 } else { 0.0 };
                let p = probs.get(r, a);
                *gr += scale * p * (indicator - g);
            }
        }
    }

    grad.scale(inv_n);
    let (eta_hat, abstain_rate_argmax) = abstention_stats(&probs);
    Ok(BatchLossResult {
        loss: (f_sum + penalty_sum) * inv_n,
        grad_logits: grad,
        eta_hat: Some(eta_hat),
        abstain_rate_argmax,
    })
}

/// Informed abstention loss:
/// `mean_j F_j + α·(η̃ − η̂)²` with `η̂ = mean_j p_abs,j` over this batch.
///
/// The penalty is added once per batch, so every sample's abstention logit is
/// coupled through `η̂`; the gradient carries that coupling term
/// `2α(η̂ − η̃)·∂η̂/∂z`. When `η̂` equals `η̃` the penalty is exactly zero.
pub fn idac_loss(logits: &Matrix, targets: &[usize], spec: &LossSpec) -> Result<BatchLossResult> {
    let k = require_abstain_column(logits)?;
    validate_targets(targets, k, logits.rows())?;
    let alpha = spec
        .alpha
        .ok_or_else(|| Error::InvalidConfig("idac requires `alpha`".to_string()))?;
    let eta_tilde = spec
        .eta_tilde
        .ok_or_else(|| Error::InvalidConfig("idac requires `eta_tilde`".to_string()))?;
    if !(0.0..=1.0).contains(&eta_tilde) {
        return Err(Error::InvalidConfig(format!("eta_tilde must be in [0, 1], got {eta_tilde}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
    }
    let (lsm, probs) = lsm_and_probs(logits)?;
    let n = logits.rows();
    let inv_n = 1.0 / n as f64;
    let abstain_col = k;

    let (f_sum, _gs, mut grad) = first_term(&lsm, &probs, targets);
    grad.scale(inv_n);

    let (eta_hat, abstain_rate_argmax) = abstention_stats(&probs);
    let diff = eta_tilde - eta_hat;
    let penalty = alpha * diff * diff;

    // ∂penalty/∂z_{j,a} = 2α(η̂ − η̃) · (1/N) · s_j·(δ_{a,abs} − p_{j,a}).
    let coupling = 2.0 * alpha * (eta_hat - eta_tilde) * inv_n;
    if coupling != 0.0 {
        for r in 0..n {
            let s = probs.get(r, abstain_col);
            let grad_row = grad.row_mut(r);
            for (a, gr) in grad_row.iter_mut().enumerate() {
                let delta = if a == abstain_col { 1.0 } else { 0.0 };
                *gr += coupling * s * (delta - probs.get(r, a));
            }
        }
    }

    Ok(BatchLossResult {
        loss: f_sum * inv_n + penalty,
        grad_logits: grad,
        eta_hat: Some(eta_hat),
        abstain_rate_argmax,
    })
}

/// Warm-up objective for abstaining models: plain cross entropy over all
/// `k+1` outputs (abstention column included in the softmax, never a target).
/// Abstention telemetry is still reported so warm-up epochs can be logged.
pub fn warmup_ce_loss(logits: &Matrix, targets: &[usize]) -> Result<BatchLossResult> {
    let k = require_abstain_column(logits)?;
    validate_targets(targets, k, logits.rows())?;
    let (lsm, probs) = lsm_and_probs(logits)?;
    let (loss, grad_logits) = ce_value_and_grad(&lsm, &probs, targets);
    let (eta_hat, abstain_rate_argmax) = abstention_stats(&probs);
    Ok(BatchLossResult { loss, grad_logits, eta_hat: Some(eta_hat), abstain_rate_argmax })
}

/// Linear ramp schedule for the `dac` abstention weight: zero through the
/// warm-up, then rising linearly from 0 at the first post-warm-up epoch to
/// `alpha_final` at the last epoch.
pub fn dac_alpha_at(
    epoch: usize,
    warmup_epochs: usize,
    total_epochs: usize,
    alpha_final: f64,
) -> f64 {
    debug_assert!(warmup_epochs < total_epochs);
    if epoch < warmup_epochs {
        return 0.0;
    }
    let last = total_epochs - 1;
    if epoch >= last || last == warmup_epochs {
        return alpha_final;
    }
    alpha_final * (epoch - warmup_epochs) as f64 / (last - warmup_epochs) as f64
}

/// Class probabilities for evaluation. Accepts logits with `num_classes` or
/// `num_classes + 1` columns; an abstention column is dropped *before* the
/// softmax, so the abstention output can never influence reported metrics.
pub fn inference_probs(logits: &Matrix, num_classes: usize) -> Result<Matrix> {
    if logits.cols() == num_classes {
        return softmax_rows(logits);
    }
    if logits.cols() == num_classes + 1 {
        let n = logits.rows();
        let mut trimmed = Matrix::zeros(n, num_classes);
        for r in 0..n {
            trimmed.row_mut(r).copy_from_slice(&logits.row(r)[..num_classes]);
        }
        return softmax_rows(&trimmed);
    }
    Err(Error::Shape(format!(
        "inference_probs: {} logit columns fit neither {} nor {} outputs",
        logits.cols(),
        num_classes,
        num_classes + 1
    )))
}
