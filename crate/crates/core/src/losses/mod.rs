//! The seven training objectives, each returning the batch loss value and
//! its analytic gradient with respect to the logits.
//!
//! Conventions shared by every loss:
//! - Logits arrive as an `N×m` batch, one row per sample; `m` is the class
//!   count `k`, or `k+1` when the model carries an abstention output (the
//!   extra column is always the last one).
//! - Targets are class indices in `[0, k)`; the abstention index is never a
//!   valid target.
//! - The per-sample losses are averaged over the batch, so values are
//!   batch-size independent; batch-level regularizers are added once after
//!   the average.
//! - All probabilities flow through log-softmax, never `softmax().ln()`.

mod abstain;
mod classic;
mod normalized;

pub use abstain::{
    abstention_stats, dac_alpha_at, dac_loss, idac_loss, inference_probs, warmup_ce_loss,
    ABSTAIN_EPS,
};
pub use classic::{ce_loss, sce_loss, sce_loss_components, SceComponents, DEFAULT_SCE_LOG_CLIP};
pub use normalized::{agce_loss, nce_loss, ngce_loss, DEGENERACY_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_softmax_rows, Matrix};

/// Which training objective to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Sce,
    Dac,
    Idac,
    Nce,
    Ngce,
    Agce,
}

impl LossKind {
    /// True for losses that train an extra abstention output.
    pub fn has_abstain_head(self) -> bool {
        matches!(self, LossKind::Dac | LossKind::Idac)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Sce => "sce",
            LossKind::Dac => "dac",
            LossKind::Idac => "idac",
            LossKind::Nce => "nce",
            LossKind::Ngce => "ngce",
            LossKind::Agce => "agce",
        }
    }
}

/// A loss choice plus its hyperparameters. Each parameter is required
/// exactly when its loss uses it; [`LossSpec::validate`] rejects both missing
/// and extraneous settings so config typos surface before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Abstention penalty weight: ramp endpoint for `dac`, constant for `idac`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Noise estimate η̃ for `idac`, in `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_tilde: Option<f64>,
    /// Value substituted for log 0 in the reverse term of `sce`; must be
    /// negative. Defaults to -4 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sce_log_clip: Option<f64>,
    /// Exponent for `ngce` / `agce`; must be positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Shift for `agce`; must be positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl LossSpec {
    pub fn ce() -> Self {
        LossSpec { kind: LossKind::Ce, alpha: None, eta_tilde: None, sce_log_clip: None, q: None, a: None }
    }

    pub fn sce(log_clip: f64) -> Self {
        LossSpec { sce_log_clip: Some(log_clip), ..LossSpec::ce_like(LossKind::Sce) }
    }

    pub fn sce_default() -> Self {
        LossSpec::sce(DEFAULT_SCE_LOG_CLIP)
    }

    pub fn dac(alpha: f64) -> Self {
        LossSpec { alpha: Some(alpha), ..LossSpec::ce_like(LossKind::Dac) }
    }

    pub fn idac(alpha: f64, eta_tilde: f64) -> Self {
        LossSpec { alpha: Some(alpha), eta_tilde: Some(eta_tilde), ..LossSpec::ce_like(LossKind::Idac) }
    }

    pub fn nce() -> Self {
        LossSpec::ce_like(LossKind::Nce)
    }

    pub fn ngce(q: f64) -> Self {
        LossSpec { q: Some(q), ..LossSpec::ce_like(LossKind::Ngce) }
    }

    pub fn agce(q: f64, a: f64) -> Self {
        LossSpec { q: Some(q), a: Some(a), ..LossSpec::ce_like(LossKind::Agce) }
    }

    fn ce_like(kind: LossKind) -> Self {
        LossSpec { kind, ..LossSpec::ce() }
    }

    /// Enforces the "required exactly when used" rule and the value ranges.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind;
        let require = |present: bool, needed: bool, field: &str| -> Result<()> {
            match (present, needed) {
                (false, true) => Err(Error::InvalidConfig(format!(
                    "loss '{}' requires `{field}`",
                    kind.name()
                ))),
                (true, false) => Err(Error::InvalidConfig(format!(
                    "loss '{}' does not accept `{field}`",
                    kind.name()
                ))),
                _ => Ok(()),
            }
        };
        require(self.alpha.is_some(), matches!(kind, LossKind::Dac | LossKind::Idac), "alpha")?;
        require(self.eta_tilde.is_some(), matches!(kind, LossKind::Idac), "eta_tilde")?;
        require(self.q.is_some(), matches!(kind, LossKind::Ngce | LossKind::Agce), "q")?;
        require(self.a.is_some(), matches!(kind, LossKind::Agce), "a")?;
        // sce_log_clip is optional for SCE (defaults to -4) but meaningless
        // elsewhere.
        if self.sce_log_clip.is_some() && kind != LossKind::Sce {
            return Err(Error::InvalidConfig(format!(
                "loss '{}' does not accept `sce_log_clip`",
                kind.name()
            )));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
            }
        }
        if let Some(eta) = self.eta_tilde {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidConfig(format!("eta_tilde must be in [0, 1], got {eta}")));
            }
        }
        if let Some(clip) = self.sce_log_clip {
            if !(clip < 0.0 && clip.is_finite()) {
                return Err(Error::InvalidConfig(format!("sce_log_clip must be < 0, got {clip}")));
            }
        }
        if let Some(q) = self.q {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::InvalidConfig(format!("q must be > 0, got {q}")));
            }
        }
        if let Some(a) = self.a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig(format!("a must be > 0, got {a}")));
            }
        }
        Ok(())
    }
}

/// Loss value and gradient for one batch.
#[derive(Debug, Clone)]
pub struct BatchLossResult {
    /// Mean per-sample objective plus any batch-level regularizer.
    pub loss: f64,
    /// `∂loss/∂logits`, same shape as the logits batch.
    pub grad_logits: Matrix,
    /// Batch mean of the abstention probability; present exactly when the
    /// logits carry an abstention column.
    pub eta_hat: Option<f64>,
    /// Fraction of rows whose abstention probability strictly exceeds every
    /// class probability; 0 when there is no abstention column.
    pub abstain_rate_argmax: f64,
}

/// Validates a target slice against the batch shape. `num_classes` is the
/// number of *real* classes, which excludes any abstention column.
pub(crate) fn validate_targets(targets: &[usize], num_classes: usize, rows: usize) -> Result<()> {
    if targets.len() != rows {
        return Err(Error::Shape(format!(
            "{} targets for a batch of {} rows",
            targets.len(),
            rows
        )));
    }
    for &t in targets {
        if t >= num_classes {
            return Err(Error::InvalidLabel { label: t, num_classes });
        }
    }
    Ok(())
}

/// Log-softmax and softmax for a logits batch, computed once per loss call.
pub(crate) fn lsm_and_probs(logits: &Matrix) -> Result<(Matrix, Matrix)> {
    let lsm = log_softmax_rows(logits)?;
    let mut probs = lsm.clone();
    for v in probs.data_mut() {
        *v = v.exp();
    }
    Ok((lsm, probs))
}

/// Dispatches a batch through the objective described by `spec`.
///
/// `dac_alpha` is the current value of the ramped abstention weight and is
/// read only by the `dac` loss; `idac` uses its constant `spec.alpha`.
/// Warm-up phases are the caller's concern (see the experiment module): this
/// function always applies the configured loss.
pub fn eval_batch(
    spec: &LossSpec,
    logits: &Matrix,
    targets: &[usize],
    dac_alpha: f64,
) -> Result<BatchLossResult> {
    spec.validate()?;
    match spec.kind {
        LossKind::Ce => ce_loss(logits, targets),
        LossKind::Sce => sce_loss(logits, targets, spec),
        LossKind::Dac => dac_loss(logits, targets, dac_alpha),
        LossKind::Idac => idac_loss(logits, targets, spec),
        LossKind::Nce => nce_loss(logits, targets),
        LossKind::Ngce => ngce_loss(logits, targets, spec),
        LossKind::Agce => agce_loss(logits, targets, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_produce_valid_specs() {
        for spec in [
            LossSpec::ce(),
            LossSpec::sce_default(),
            LossSpec::sce(-2.0),
            LossSpec::dac(1.0),
            LossSpec::idac(10.0, 0.15),
            LossSpec::nce(),
            LossSpec::ngce(0.5),
            LossSpec::agce(0.5, 0.75),
        ] {
            spec.validate().unwrap_or_else(|e| panic!("{spec:?}: {e}"));
        }
    }

    #[test]
    fn missing_and_extraneous_parameters_are_rejected() {
        let mut missing_alpha = LossSpec::ce_like(LossKind::Dac);
        missing_alpha.validate().unwrap_err();
        missing_alpha.alpha = Some(1.0);
        missing_alpha.validate().unwrap();

        let mut extraneous = LossSpec::ce();
        extraneous.q = Some(0.5);
        assert!(matches!(extraneous.validate(), Err(Error::InvalidConfig(_))));

        let mut idac_without_eta = LossSpec::idac(1.0, 0.1);
        idac_without_eta.eta_tilde = None;
        idac_without_eta.validate().unwrap_err();

        let mut sce_clip_elsewhere = LossSpec::dac(1.0);
        sce_clip_elsewhere.sce_log_clip = Some(-4.0);
        sce_clip_elsewhere.validate().unwrap_err();
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(LossSpec::idac(1.0, 1.5).validate().is_err());
        assert!(LossSpec::idac(-1.0, 0.1).validate().is_err());
        assert!(LossSpec::sce(0.5).validate().is_err());
        assert!(LossSpec::ngce(0.0).validate().is_err());
        assert!(LossSpec::agce(0.5, 0.0).validate().is_err());
    }

    #[test]
    fn loss_spec_serde_round_trips_and_rejects_unknown_fields() {
        let spec = LossSpec::idac(10.0, 0.4);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"idac","alpha":10.0,"eta_tilde":0.4}"#);
        let back: LossSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<LossSpec>(r#"{"kind":"ce","beta":1.0}"#).is_err());
    }

    #[test]
    fn validate_targets_enforces_range_and_length() {
        validate_targets(&[0, 1, 1], 2, 3).unwrap();
        assert!(matches!(
            validate_targets(&[0, 2], 2, 2),
            Err(Error::InvalidLabel { label: 2, num_classes: 2 })
        ));
        assert!(matches!(validate_targets(&[0], 2, 2), Err(Error::Shape(_))));
    }
}
