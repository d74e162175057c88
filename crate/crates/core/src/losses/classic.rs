//! Cross entropy and symmetric cross entropy.

use crate::error::Result;
use crate::losses::{lsm_and_probs, validate_targets, BatchLossResult};
use crate::numerics::Matrix;

/// Default substitute for log 0 in the reverse cross-entropy term.
pub const DEFAULT_SCE_LOG_CLIP: f64 = -4.0;

/// Mean negative target log-probability and its logits gradient, on
/// pre-validated inputs. Shared by plain CE, the CE part of SCE, and the
/// warm-up objective so that all three accumulate in the same order and agree
/// bit for bit where the math says they must.
pub(crate) fn ce_value_and_grad(
    lsm: &Matrix,
    probs: &Matrix,
    targets: &[usize],
) -> (f64, Matrix) {
    let n = lsm.rows();
    let inv_n = 1.0 / n as f64;
    let mut sum = 0.0;
    let mut grad = probs.clone();
    for (r, &t) in targets.iter().enumerate() {
        sum += -lsm.get(r, t);
        let row = grad.row_mut(r);
        row[t] -= 1.0;
        for g in row.iter_mut() {
            *g *= inv_n;
        }
    }
    (sum * inv_n, grad)
}

/// Standard cross entropy: mean of `−log p_target` with gradient
/// `(softmax − onehot) / N` per row.
pub fn ce_loss(logits: &Matrix, targets: &[usize]) -> Result<BatchLossResult> {
    validate_targets(targets, logits.cols(), logits.rows())?;
    let (lsm, probs) = lsm_and_probs(logits)?;
    let (loss, grad_logits) = ce_value_and_grad(&lsm, &probs, targets);
    Ok(BatchLossResult { loss, grad_logits, eta_hat: None, abstain_rate_argmax: 0.0 })
}

/// The two addends of the symmetric cross entropy, kept separate so that the
/// identity "SCE with the reverse term removed equals CE" can be asserted at
/// the bit level rather than through a floating-point subtraction.
#[derive(Debug, Clone, Copy)]
pub struct SceComponents {
    /// Mean cross-entropy term; bitwise equal to [`ce_loss`] on the same batch.
    pub ce: f64,
    /// Mean reverse term `−clip·(1 − p_target)`.
    pub rce: f64,
    /// The reported loss, `ce + rce`.
    pub total: f64,
}

/// Computes both SCE components. `log_clip` must be negative; it stands in
/// for `log 0` on the zero slots of the one-hot target, which makes the
/// reverse cross entropy `−Σᵢ pᵢ·log tᵢ` collapse to `−clip·(1 − p_target)`.
pub fn sce_loss_components(
    logits: &Matrix,
    targets: &[usize],
    log_clip: f64,
) -> Result<(SceComponents, Matrix)> {
    validate_targets(targets, logits.cols(), logits.rows())?;
    let (lsm, probs) = lsm_and_probs(logits)?;
    let n = logits.rows();
    let inv_n = 1.0 / n as f64;

    let (ce, mut grad) = ce_value_and_grad(&lsm, &probs, targets);

    let mut rce_sum = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let p_t = probs.get(r, t);
        rce_sum += -log_clip * (1.0 - p_t);
        // d/dz_a of −clip·(1 − p_t) = clip · p_t (δ_at − p_a); folded into
        // the CE gradient this yields (p_a − δ_at)(1 − clip·p_t)/N per entry.
        let factor = 1.0 - log_clip * p_t;
        for g in grad.row_mut(r).iter_mut() {
            *g *= factor;
        }
    }
    let rce = rce_sum * inv_n;

    Ok((SceComponents { ce, rce, total: ce + rce }, grad))
}

/// Symmetric cross entropy: CE plus a clipped reverse cross-entropy term,
/// both with unit weight.
pub fn sce_loss(
    logits: &Matrix,
    targets: &[usize],
    spec: &super::LossSpec,
) -> Result<BatchLossResult> {
    let log_clip = spec.sce_log_clip.unwrap_or(DEFAULT_SCE_LOG_CLIP);
    let (components, grad_logits) = sce_loss_components(logits, targets, log_clip)?;
    Ok(BatchLossResult {
        loss: components.total,
        grad_logits,
        eta_hat: None,
        abstain_rate_argmax: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossSpec;
    use crate::numerics::{finite_diff_grad, max_grad_rel_err, Rng};

    fn grad_check<F>(loss: F, logits: &Matrix, analytic: &Matrix) -> f64
    where
        F: Fn(&Matrix) -> Result<f64>,
    {
        let numeric = finite_diff_grad(
            |flat| {
                let m = Matrix::from_vec(logits.rows(), logits.cols(), flat.to_vec())?;
                loss(&m)
            },
            logits.data(),
            1e-5,
        )
        .unwrap();
        max_grad_rel_err(analytic.data(), &numeric)
    }

    fn random_batch(rng: &mut Rng, n: usize, m: usize) -> Matrix {
        Matrix::from_vec(n, m, (0..n * m).map(|_| rng.uniform_in(-3.0, 3.0)).collect()).unwrap()
    }

    #[test]
    fn uniform_two_class_prediction_costs_ln_two() {
        let logits = Matrix::from_rows(&[&[0.0, 0.0]]).unwrap();
        let res = ce_loss(&logits, &[0]).unwrap();
        assert!((res.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(res.eta_hat.is_none());
        assert_eq!(res.abstain_rate_argmax, 0.0);
    }

    #[test]
    fn confident_correct_prediction_costs_nearly_nothing() {
        let logits = Matrix::from_rows(&[&[20.0, -20.0]]).unwrap();
        let res = ce_loss(&logits, &[0]).unwrap();
        assert!(res.loss < 1e-8, "loss {}", res.loss);
    }

    #[test]
    fn ce_rejects_out_of_range_targets() {
        let logits = Matrix::zeros(1, 2);
        assert!(ce_loss(&logits, &[2]).is_err());
    }

    #[test]
    fn ce_gradient_matches_finite_differences() {
        let mut rng = Rng::new(314);
        let logits = random_batch(&mut rng, 3, 3);
        let targets = [0, 2, 1];
        let res = ce_loss(&logits, &targets).unwrap();
        let err = grad_check(|m| Ok(ce_loss(m, &targets)?.loss), &logits, &res.grad_logits);
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn sce_on_exact_onehot_reduces_to_ce() {
        // Extreme logits push p_target to exactly 1.0 in f64, so the reverse
        // term vanishes and SCE equals CE.
        let logits = Matrix::from_rows(&[&[60.0, -60.0]]).unwrap();
        let (components, _) = sce_loss_components(&logits, &[0], -4.0).unwrap();
        assert_eq!(components.rce, 0.0);
        assert_eq!(components.total, components.ce);
        assert_eq!(components.ce, ce_loss(&logits, &[0]).unwrap().loss);
    }

    #[test]
    fn sce_uniform_two_class_example() {
        // CE = ln 2, reverse term = 4 · (1 − 0.5) = 2.
        let logits = Matrix::from_rows(&[&[0.0, 0.0]]).unwrap();
        let res = sce_loss(&logits, &[0], &LossSpec::sce(-4.0)).unwrap();
        assert!((res.loss - 2.6931471805599454).abs() < 1e-15, "loss {}", res.loss);
    }

    #[test]
    fn sce_ce_component_is_bitwise_equal_to_ce_loss() {
        let mut rng = Rng::new(2718);
        for _ in 0..20 {
            let n = 1 + rng.below(6) as usize;
            let k = 2 + rng.below(4) as usize;
            let logits = random_batch(&mut rng, n, k);
            let targets: Vec<usize> = (0..n).map(|_| rng.below(k as u64) as usize).collect();
            let (components, _) = sce_loss_components(&logits, &targets, -4.0).unwrap();
            let ce = ce_loss(&logits, &targets).unwrap().loss;
            assert_eq!(components.ce.to_bits(), ce.to_bits());
        }
    }

    #[test]
    fn sce_gradient_matches_finite_differences() {
        let mut rng = Rng::new(1618);
        let spec = LossSpec::sce(-2.5);
        let logits = random_batch(&mut rng, 4, 3);
        let targets = [1, 0, 2, 2];
        let res = sce_loss(&logits, &targets, &spec).unwrap();
        let err = grad_check(|m| Ok(sce_loss(m, &targets, &spec)?.loss), &logits, &res.grad_logits);
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn batch_mean_makes_loss_batch_size_independent() {
        let logits = Matrix::from_rows(&[&[0.4, -0.2]]).unwrap();
        let single = ce_loss(&logits, &[0]).unwrap().loss;
        let doubled = Matrix::from_rows(&[&[0.4, -0.2], &[0.4, -0.2]]).unwrap();
        let double = ce_loss(&doubled, &[0, 0]).unwrap().loss;
        assert!((single - double).abs() < 1e-15);
    }
}
