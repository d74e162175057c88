//! Hyperparameter sweeps: a small cartesian grid over the knobs the training
//! protocol actually exposes, with per-point failure isolation and a ranked
//! results table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiment::{run, ExperimentResult, TrainConfig};
use crate::losses::{LossKind, LossSpec};
use crate::metrics::format_point_ci;

/// Axes of the sweep. `None` keeps the base config's value; a present axis
/// must be non-empty. Points are enumerated with `loss_kinds` outermost and
/// `a_params` innermost, but results do not depend on that order: every
/// point runs from the base seed, so a grid of size one is exactly `run`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub loss_kinds: Option<Vec<LossKind>>,
    /// Abstention penalty weight (`dac` / `idac` only).
    pub alphas: Option<Vec<f64>>,
    pub warmups: Option<Vec<usize>>,
    /// Initial learning rates.
    pub lrs: Option<Vec<f64>>,
    /// Exponent for `ngce` / `agce`.
    pub qs: Option<Vec<f64>>,
    /// Shift for `agce`.
    pub a_params: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        fn non_empty<T>(axis: &Option<Vec<T>>, name: &str) -> Result<()> {
            match axis {
                Some(v) if v.is_empty() => {
                    Err(Error::InvalidConfig(format!("grid axis `{name}` is empty")))
                }
                _ => Ok(()),
            }
        }
        non_empty(&self.loss_kinds, "loss_kinds")?;
        non_empty(&self.alphas, "alphas")?;
        non_empty(&self.warmups, "warmups")?;
        non_empty(&self.lrs, "lrs")?;
        non_empty(&self.qs, "qs")?;
        non_empty(&self.a_params, "a_params")
    }

    pub fn num_points(&self) -> usize {
        fn len<T>(axis: &Option<Vec<T>>) -> usize {
            axis.as_ref().map_or(1, Vec::len)
        }
        len(&self.loss_kinds)
            * len(&self.alphas)
            * len(&self.warmups)
            * len(&self.lrs)
            * len(&self.qs)
            * len(&self.a_params)
    }

    /// All grid points in enumeration order. Materialization failures (an
    /// axis value the point's loss cannot use, a missing required parameter)
    /// are returned as per-point errors, not sweep-level ones.
    fn materialize(&self, base: &TrainConfig) -> Vec<Result<TrainConfig>> {
        fn axis<T: Copy>(values: &Option<Vec<T>>) -> Vec<Option<T>> {
            match values {
                Some(v) => v.iter().copied().map(Some).collect(),
                None => vec![None],
            }
        }
        let mut out = Vec::with_capacity(self.num_points());
        for &kind in &axis(&self.loss_kinds) {
            for &alpha in &axis(&self.alphas) {
                for &warmup in &axis(&self.warmups) {
                    for &lr in &axis(&self.lrs) {
                        for &q in &axis(&self.qs) {
                            for &a in &axis(&self.a_params) {
                                out.push(materialize_point(base, kind, alpha, warmup, lr, q, a));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn uses_alpha(kind: LossKind) -> bool {
    matches!(kind, LossKind::Dac | LossKind::Idac)
}

fn uses_q(kind: LossKind) -> bool {
    matches!(kind, LossKind::Ngce | LossKind::Agce)
}

fn uses_a(kind: LossKind) -> bool {
    kind == LossKind::Agce
}

/// Builds the loss for a grid point. Axis-provided values must apply to the
/// point's loss kind; values carried over from the base loss are dropped
/// silently when the kind changes (they are defaults, not demands).
fn loss_for_point(
    kind: LossKind,
    axis_alpha: Option<f64>,
    axis_q: Option<f64>,
    axis_a: Option<f64>,
    base: &LossSpec,
) -> Result<LossSpec> {
    for (value, name, applies) in [
        (axis_alpha, "alphas", uses_alpha(kind)),
        (axis_q, "qs", uses_q(kind)),
        (axis_a, "a_params", uses_a(kind)),
    ] {
        if value.is_some() && !applies {
            return Err(Error::InvalidConfig(format!(
                "grid axis `{name}` does not apply to loss '{}'",
                kind.name()
            )));
        }
    }
    let inherit = |axis: Option<f64>, from_base: Option<f64>| axis.or(from_base);
    let need = |value: Option<f64>, name: &str| {
        value.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "loss '{}' needs `{name}` from a grid axis or the base loss",
                kind.name()
            ))
        })
    };
    Ok(match kind {
        LossKind::Ce => LossSpec::ce(),
        LossKind::Nce => LossSpec::nce(),
        LossKind::Sce => match base.sce_log_clip {
            Some(clip) => LossSpec::sce(clip),
            None => LossSpec::sce_default(),
        },
        LossKind::Dac => LossSpec::dac(need(inherit(axis_alpha, base.alpha), "alpha")?),
        LossKind::Idac => LossSpec {
            eta_tilde: None,
            ..LossSpec::idac(need(inherit(axis_alpha, base.alpha), "alpha")?, 0.0)
        },
        LossKind::Ngce => LossSpec::ngce(need(inherit(axis_q, base.q), "q")?),
        LossKind::Agce => LossSpec::agce(
            need(inherit(axis_q, base.q), "q")?,
            need(inherit(axis_a, base.a), "a")?,
        ),
    })
}

fn materialize_point(
    base: &TrainConfig,
    kind: Option<LossKind>,
    alpha: Option<f64>,
    warmup: Option<usize>,
    lr: Option<f64>,
    q: Option<f64>,
    a: Option<f64>,
) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    let kind = kind.unwrap_or(base.loss.kind);
    cfg.loss = loss_for_point(kind, alpha, q, a, &base.loss)?;
    cfg.model.abstain_head = kind.has_abstain_head();
    if kind != LossKind::Idac {
        cfg.eta_tilde_policy = None;
    }
    if let Some(w) = warmup {
        cfg.warmup_epochs = w;
    }
    if let Some(lr) = lr {
        cfg.optim.lr0 = lr;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One grid point: its enumeration index, the materialized config (absent if
/// materialization itself failed), and either a completed run or an error.
#[derive(Debug, Clone)]
pub struct GridPointResult {
    pub index: usize,
    pub config: Option<TrainConfig>,
    pub result: Option<ExperimentResult>,
    pub error: Option<String>,
}

impl GridPointResult {
    pub fn val_auroc(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.selected_val_auroc)
    }
}

/// Runs every grid point and returns them ranked: successful runs by
/// validation AUROC (descending, ties by enumeration index), failures last.
///
/// Points may execute in parallel (install a scoped thread pool to bound the
/// parallelism); every point derives all randomness from its own config, so
/// scheduling cannot change any result.
pub fn grid_search(
    base: &TrainConfig,
    grid: &GridSpec,
    dataset: &Dataset,
) -> Result<Vec<GridPointResult>> {
    grid.validate()?;
    let points = grid.materialize(base);
    let mut results: Vec<GridPointResult> = points
        .into_par_iter()
        .enumerate()
        .map(|(index, cfg)| match cfg {
            Err(e) => GridPointResult { index, config: None, result: None, error: Some(e.to_string()) },
            Ok(cfg) => match run(&cfg, dataset) {
                Ok(result) => GridPointResult {
                    index,
                    config: Some(cfg),
                    result: Some(result),
                    error: None,
                },
                Err(e) => GridPointResult {
                    index,
                    config: Some(cfg),
                    result: None,
                    error: Some(e.to_string()),
                },
            },
        })
        .collect();
    results.sort_by(|x, y| match (&x.result, &y.result) {
        (Some(a), Some(b)) => b
            .selected_val_auroc
            .partial_cmp(&a.selected_val_auroc)
            .expect("AUROC is finite")
            .then(x.index.cmp(&y.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => x.index.cmp(&y.index),
    });
    Ok(results)
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Plain-text ranked table, one row per grid point. Test AUROC cells use the
/// `point [low, high]` percentage style.
pub fn render_table(results: &[GridPointResult]) -> String {
    let mut rows: Vec<[String; 10]> = Vec::with_capacity(results.len() + 1);
    rows.push([
        "rank", "loss", "alpha", "warmup", "lr", "q", "a", "val_auroc", "test_auroc [95% CI]",
        "note",
    ]
    .map(str::to_string));
    for (pos, point) in results.iter().enumerate() {
        let cfg = point.config.as_ref();
        let loss = cfg.map(|c| c.loss.clone());
        rows.push([
            (pos + 1).to_string(),
            loss.as_ref().map_or("-".to_string(), |l| l.kind.name().to_string()),
            fmt_opt(loss.as_ref().and_then(|l| l.alpha)),
            fmt_opt(cfg.map(|c| c.warmup_epochs)),
            fmt_opt(cfg.map(|c| c.optim.lr0)),
            fmt_opt(loss.as_ref().and_then(|l| l.q)),
            fmt_opt(loss.as_ref().and_then(|l| l.a)),
            point
                .val_auroc()
                .map_or("-".to_string(), |v| format!("{v:.4}")),
            point.result.as_ref().map_or("-".to_string(), |r| {
                format_point_ci(
                    r.test_metrics.auroc,
                    r.test_metrics.auroc_ci_low,
                    r.test_metrics.auroc_ci_high,
                )
            }),
            point.error.clone().unwrap_or_else(|| {
                format!("run {}", point.result.as_ref().map_or("-", |r| r.run_id.as_str()))
            }),
        ]);
    }
    let mut widths = [0usize; 10];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (cell, w) in row.iter().zip(widths) {
            line.push_str(&format!("{cell:<w$}  "));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
