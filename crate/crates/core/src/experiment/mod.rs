//! End-to-end training protocol: optional noise injection, warm-up, epoch
//! loop with per-batch telemetry, validation-AUROC model selection, and the
//! final test report.

pub mod grid;
pub mod persist;

pub use grid::{grid_search, render_table, GridPointResult, GridSpec};
pub use persist::{
    run_id, save_grid, save_run, CHECKPOINT_FILE, EPOCHS_FILE, NOISE_RECORD_FILE, SUMMARY_FILE,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batches, BatchIterator, Dataset, Split};
use crate::error::{Error, Result};
use crate::losses::{dac_alpha_at, eval_batch, inference_probs, warmup_ce_loss, LossKind, LossSpec};
use crate::metrics::{auroc, MetricsReport};
use crate::model::{backward, forward, forward_cached, init, MlpSpec, MlpState};
use crate::noise::{inject_noise, NoiseRecord};
use crate::numerics::{derive_seed, stream, Matrix, Rng};
use crate::optim::{lr_at, sgd_step, OptimConfig};

/// Resamples used for every test-set confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Decision threshold for the thresholded test metrics.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// How the noise estimate η̃ is chosen for the informed abstention loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EtaTildePolicy {
    /// A fixed value, e.g. an external labeler-audit estimate.
    Explicit { value: f64 },
    /// Copy the injected noise rate (simulation studies).
    UseInjectedRate,
    /// The injected rate, but never below `value`; covers clean-data runs
    /// where a small positive estimate is still wanted.
    Floor {
        #[serde(default = "default_floor")]
        value: f64,
    },
}

fn default_floor() -> f64 {
    0.005
}

/// Resolves a policy against the injected noise rate (`None` when no noise
/// is configured).
pub fn resolve_eta_tilde(policy: &EtaTildePolicy, injected_rate: Option<f64>) -> Result<f64> {
    let value = match policy {
        EtaTildePolicy::Explicit { value } => *value,
        EtaTildePolicy::UseInjectedRate => injected_rate.ok_or_else(|| {
            Error::InvalidConfig(
                "eta_tilde_policy use-injected-rate needs a noise config".to_string(),
            )
        })?,
        EtaTildePolicy::Floor { value } => injected_rate.unwrap_or(0.0).max(*value),
    };
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "resolved eta_tilde {value} is outside [0, 1]"
        )));
    }
    Ok(value)
}

/// Noise injected into the train split before training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub rate: f64,
    pub seed: u64,
}

/// Everything one experiment needs. For the informed abstention loss the
/// noise estimate must arrive via `eta_tilde_policy`; writing `eta_tilde`
/// directly on the loss is rejected so configs state their intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub model: MlpSpec,
    #[serde(default)]
    pub optim: OptimConfig,
    pub total_epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_tilde_policy: Option<EtaTildePolicy>,
}

impl TrainConfig {
    /// The loss actually trained with: for the informed abstention loss,
    /// η̃ is filled in from the policy and the injected rate.
    pub fn resolved_loss(&self) -> Result<LossSpec> {
        let mut loss = self.loss.clone();
        if loss.kind == LossKind::Idac {
            if loss.eta_tilde.is_some() {
                return Err(Error::InvalidConfig(
                    "set eta_tilde through eta_tilde_policy, not directly on the loss".to_string(),
                ));
            }
            let policy = self.eta_tilde_policy.as_ref().ok_or_else(|| {
                Error::InvalidConfig("loss 'idac' requires an eta_tilde_policy".to_string())
            })?;
            loss.eta_tilde = Some(resolve_eta_tilde(policy, self.noise.map(|n| n.rate))?);
        } else if self.eta_tilde_policy.is_some() {
            return Err(Error::InvalidConfig(format!(
                "eta_tilde_policy has no effect on loss '{}'",
                loss.kind.name()
            )));
        }
        loss.validate()?;
        Ok(loss)
    }

    pub fn validate(&self) -> Result<()> {
        let _ = self.resolved_loss()?;
        self.model.validate()?;
        self.optim.validate()?;
        if self.total_epochs == 0 {
            return Err(Error::InvalidConfig("total_epochs must be >= 1".to_string()));
        }
        if self.warmup_epochs >= self.total_epochs {
            return Err(Error::InvalidConfig(format!(
                "warmup_epochs {} must be < total_epochs {}",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
        }
        if self.model.abstain_head != self.loss.kind.has_abstain_head() {
            return Err(Error::InvalidConfig(format!(
                "model.abstain_head = {} but loss '{}' {} an abstention output",
                self.model.abstain_head,
                self.loss.kind.name(),
                if self.loss.kind.has_abstain_head() { "requires" } else { "forbids" }
            )));
        }
        if let Some(noise) = &self.noise {
            if !(0.0..=1.0).contains(&noise.rate) || !noise.rate.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "noise rate must be in [0, 1], got {}",
                    noise.rate
                )));
            }
        }
        Ok(())
    }
}

/// Telemetry for one epoch. Batch-level quantities (`train_loss`, `eta_hat`,
/// `abstain_rate_argmax`) are averaged over the epoch's batches. Wall time is
/// kept in memory only: serialized records must be byte-identical across
/// reruns of the same config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub eta_hat: f64,
    pub abstain_rate_argmax: f64,
    pub lr: f64,
    pub val_auroc: f64,
    #[serde(skip, default)]
    pub wall_time_s: f64,
}

/// Output of one experiment. File references are relative to the run
/// directory and filled in when the run is persisted; the model states are
/// memory-only (the selected state is what `checkpoint.bin` stores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub run_id: String,
    pub config: TrainConfig,
    /// `config.loss` with η̃ resolved; this is what training used.
    pub resolved_loss: LossSpec,
    pub epochs: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub selected_val_auroc: f64,
    /// Test metrics of the selected (best validation AUROC) model.
    pub test_metrics: MetricsReport,
    /// Test AUROC of the final-epoch model, without validation selection.
    pub final_test_auroc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_record_file: Option<String>,
    #[serde(skip)]
    pub noise_record: Option<NoiseRecord>,
    #[serde(skip)]
    pub best_state: Option<MlpState>,
    #[serde(skip)]
    pub final_state: Option<MlpState>,
}

/// Index of the record with the highest validation AUROC, earliest on ties.
pub fn select_epoch(epochs: &[EpochRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, rec) in epochs.iter().enumerate() {
        if best.map_or(true, |b| rec.val_auroc > epochs[b].val_auroc) {
            best = Some(i);
        }
    }
    best
}

/// Positive-class scores for binary evaluation. The abstention column, if
/// the model has one, is dropped before the softmax.
pub fn positive_scores(state: &MlpState, features: &Matrix, num_classes: usize) -> Result<Vec<f64>> {
    let logits = forward(state, features)?;
    let probs = inference_probs(&logits, num_classes)?;
    Ok((0..probs.rows()).map(|r| probs.get(r, 1)).collect())
}

/// Runs the full protocol on `dataset`:
///
/// 1. inject noise into the train split if configured;
/// 2. resolve η̃ and initialize the model from the seed's init stream;
/// 3. per epoch: seeded shuffle, batch loss + gradient step, telemetry,
///    validation AUROC (abstention output never scored);
/// 4. keep the best-validation state; report test metrics once from it,
///    plus the final-epoch test AUROC for selection-free comparisons.
///
/// Abstaining losses spend `warmup_epochs` on plain CE over all `k + 1`
/// outputs before their abstention term activates; other losses train with
/// their own objective from epoch 0.
pub fn run(config: &TrainConfig, dataset: &Dataset) -> Result<ExperimentResult> {
    config.validate()?;
    dataset.validate_for_training()?;
    if dataset.num_classes != 2 {
        return Err(Error::InvalidConfig(format!(
            "evaluation is binary (AUROC); dataset has {} classes",
            dataset.num_classes
        )));
    }
    if config.model.input_dim != dataset.dim() {
        return Err(Error::Shape(format!(
            "model expects {} inputs, dataset has {} features",
            config.model.input_dim,
            dataset.dim()
        )));
    }
    if config.model.num_classes != dataset.num_classes {
        return Err(Error::InvalidConfig(format!(
            "model has {} classes, dataset has {}",
            config.model.num_classes, dataset.num_classes
        )));
    }

    let loss = config.resolved_loss()?;
    let (train_ds, noise_record) = match &config.noise {
        Some(nc) => {
            let (noisy, record) = inject_noise(dataset, nc.rate, nc.seed)?;
            (noisy, Some(record))
        }
        None => (dataset.clone(), None),
    };

    let mut init_rng = Rng::new(derive_seed(config.seed, &[stream::INIT]));
    let mut state = init(&config.model, &mut init_rng)?;
    let iterator = BatchIterator::new(config.batch_size, config.seed);

    let (val_x, val_y, _) = train_ds.split_rows(Split::Val);
    let (test_x, test_y, _) = train_ds.split_rows(Split::Test);

    let abstaining = loss.kind.has_abstain_head();
    let alpha_final = loss.alpha.unwrap_or(0.0);
    let k = config.model.num_classes;

    let mut epochs: Vec<EpochRecord> = Vec::with_capacity(config.total_epochs);
    let mut best: Option<(f64, usize, MlpState)> = None;

    // Inputs are validated finite up front, so a non-finite value inside
    // evaluation scoring can only mean the parameters blew up.
    let score_split = |state: &MlpState, x: &Matrix, epoch: usize| -> Result<Vec<f64>> {
        match positive_scores(state, x, k) {
            Err(Error::InvalidInput(detail)) => Err(Error::Diverged {
                epoch,
                detail: format!("evaluation scoring failed: {detail}"),
            }),
            other => other,
        }
    };

    for epoch in 0..config.total_epochs {
        let started = Instant::now();
        let lr = lr_at(epoch, &config.optim);
        let mut loss_sum = 0.0;
        let mut rows = 0.0;
        let mut eta_sum = 0.0;
        let mut abstain_sum = 0.0;
        let mut n_batches = 0.0;

        for batch in batches(&train_ds, Split::Train, &iterator, epoch)? {
            let (logits, cache) = forward_cached(&state, &batch.features)?;
            if !logits.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: "forward pass produced non-finite logits".to_string(),
                });
            }
            let result = if abstaining && epoch < config.warmup_epochs {
                warmup_ce_loss(&logits, &batch.labels)?
            } else {
                let dac_alpha = match loss.kind {
                    LossKind::Dac => {
                        dac_alpha_at(epoch, config.warmup_epochs, config.total_epochs, alpha_final)
                    }
                    _ => 0.0,
                };
                eval_batch(&loss, &logits, &batch.labels, dac_alpha)?
            };
            if !result.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("batch loss became {}", result.loss),
                });
            }
            let grads = backward(&state, &cache, &result.grad_logits)?;
            sgd_step(&mut state, &grads, lr, &config.optim, epoch)?;

            let n = batch.labels.len() as f64;
            loss_sum += result.loss * n;
            rows += n;
            eta_sum += result.eta_hat.unwrap_or(0.0);
            abstain_sum += result.abstain_rate_argmax;
            n_batches += 1.0;
        }

        let val_scores = score_split(&state, &val_x, epoch)?;
        let val_auroc = auroc(&val_scores, &val_y)?;
        if best.as_ref().map_or(true, |(b, _, _)| val_auroc > *b) {
            best = Some((val_auroc, epoch, state.clone()));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / rows,
            eta_hat: eta_sum / n_batches,
            abstain_rate_argmax: abstain_sum / n_batches,
            lr,
            val_auroc,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }

    let (selected_val_auroc, selected_epoch, best_state) =
        best.expect("total_epochs >= 1 guarantees at least one epoch record");
    debug_assert_eq!(select_epoch(&epochs), Some(selected_epoch));

    let test_scores = score_split(&best_state, &test_x, selected_epoch)?;
    let test_metrics = MetricsReport::compute(
        &test_scores,
        &test_y,
        DECISION_THRESHOLD,
        BOOTSTRAP_RESAMPLES,
        derive_seed(config.seed, &[stream::BOOTSTRAP]),
    )?;
    let final_scores = score_split(&state, &test_x, config.total_epochs - 1)?;
    let final_test_auroc = auroc(&final_scores, &test_y)?;

    Ok(ExperimentResult {
        run_id: persist::run_id(config),
        config: config.clone(),
        resolved_loss: loss,
        epochs,
        selected_epoch,
        selected_val_auroc,
        test_metrics,
        final_test_auroc,
        checkpoint_file: None,
        noise_record_file: None,
        noise_record,
        best_state: Some(best_state),
        final_state: Some(state),
    })
}
