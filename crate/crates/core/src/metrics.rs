//! Evaluation metrics: tie-aware AUROC, percentile-bootstrap confidence
//! intervals, and thresholded confusion-matrix metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, stream, Rng};

fn validate_scored_labels(scores: &[f64], labels: &[usize]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("no samples".to_string()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores contain a non-finite value".to_string()));
    }
    for &l in labels {
        if l > 1 {
            return Err(Error::InvalidLabel { label: l, num_classes: 2 });
        }
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::UndefinedMetric(
            "AUROC needs both classes present".to_string(),
        ));
    }
    Ok(())
}

/// Area under the ROC curve via midranks:
/// `P(score⁺ > score⁻) + ½·P(score⁺ = score⁻)` in O(n log n).
///
/// For n ≤ 200 every intermediate quantity is an exactly representable
/// half-integer, so this equals the O(n²) pairwise count bit for bit.
pub fn auroc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    validate_scored_labels(scores, labels)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Scores are finite, so partial_cmp is total here.
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the midrank (i + j + 2)/2.
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n_neg = n as f64 - n_pos;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Linear-interpolation percentile of pre-sorted values, `p` in [0, 1].
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95% percentile-bootstrap interval for the AUROC: rows are resampled with
/// replacement `n_resamples` times and the 2.5th/97.5th percentiles of the
/// resampled statistic are returned. Resamples that lose one class entirely
/// are redrawn. Each resample owns an RNG substream keyed by its index, so
/// the interval is identical however the resamples are scheduled.
pub fn bootstrap_ci(
    scores: &[f64],
    labels: &[usize],
    n_resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    validate_scored_labels(scores, labels)?;
    if n_resamples == 0 {
        return Err(Error::InvalidConfig("n_resamples must be >= 1".to_string()));
    }
    let n = scores.len();
    let mut stats: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = Rng::new(derive_seed(seed, &[stream::BOOTSTRAP, r as u64]));
            let mut s = vec![0.0; n];
            let mut l = vec![0usize; n];
            loop {
                let mut pos = 0usize;
                for i in 0..n {
                    let idx = rng.below(n as u64) as usize;
                    s[i] = scores[idx];
                    l[i] = labels[idx];
                    pos += l[i];
                }
                if pos > 0 && pos < n {
                    break;
                }
            }
            auroc(&s, &l)
        })
        .collect::<Result<_>>()?;
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((percentile(&stats, 0.025), percentile(&stats, 0.975)))
}

/// Confusion-matrix metrics at a fixed threshold; `degenerate` flags any
/// zero-denominator metric that was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedMetrics {
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub degenerate: bool,
}

/// Standard confusion-matrix metrics with prediction `score >= threshold`.
pub fn thresholded_metrics(
    scores: &[f64],
    labels: &[usize],
    threshold: f64,
) -> Result<ThresholdedMetrics> {
    validate_scored_labels(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fne) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fne += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    // Both classes are present, so TPR/TNR denominators are never zero.
    let recall = ratio(tp, tp + fne);
    let tnr = ratio(tn, tn + fp);
    let precision = ratio(tp, tp + fp);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Ok(ThresholdedMetrics {
        balanced_accuracy: (recall + tnr) / 2.0,
        f1,
        precision,
        recall,
        degenerate,
    })
}

/// Full evaluation of one score vector: AUROC with a bootstrap CI plus the
/// thresholded metrics, with the settings recorded alongside the values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auroc: f64,
    pub auroc_ci_low: f64,
    pub auroc_ci_high: f64,
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub degenerate_threshold_metrics: bool,
}

impl MetricsReport {
    pub fn compute(
        scores: &[f64],
        labels: &[usize],
        threshold: f64,
        n_bootstrap: usize,
        seed: u64,
    ) -> Result<MetricsReport> {
        let point = auroc(scores, labels)?;
        let (lo, hi) = bootstrap_ci(scores, labels, n_bootstrap, seed)?;
        let th = thresholded_metrics(scores, labels, threshold)?;
        Ok(MetricsReport {
            auroc: point,
            auroc_ci_low: lo,
            auroc_ci_high: hi,
            balanced_accuracy: th.balanced_accuracy,
            f1: th.f1,
            precision: th.precision,
            recall: th.recall,
            threshold,
            n_bootstrap,
            seed,
            degenerate_threshold_metrics: th.degenerate,
        })
    }

    /// The AUROC cell in `point [low, high]` style, e.g. `93.3 [91.2, 95.6]`.
    pub fn formatted_auroc(&self) -> String {
        format_point_ci(self.auroc, self.auroc_ci_low, self.auroc_ci_high)
    }
}

/// Renders a metric in `[0, 1]` with its CI as percentages to one decimal:
/// `format_point_ci(0.933, 0.912, 0.956) == "93.3 [91.2, 95.6]"`.
pub fn format_point_ci(point: f64, low: f64, high: f64) -> String {
    format!("{:.1} [{:.1}, {:.1}]", 100.0 * point, 100.0 * low, 100.0 * high)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force pairwise statistic: wins + half-ties over all
    /// positive/negative pairs. Independent of the midrank path.
    fn pairwise_auroc(scores: &[f64], labels: &[usize]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, (&si, &li)) in scores.iter().zip(labels).enumerate() {
            for (j, (&sj, &lj)) in scores.iter().zip(labels).enumerate() {
                if i == j || li != 1 || lj != 0 {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / pairs
    }

    #[test]
    fn perfect_separation_scores_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1, 1, 0, 0];
        assert_eq!(auroc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(auroc(&[0.1, 0.9], &[0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn constant_scores_give_one_half() {
        let scores = [0.5; 6];
        let labels = [1, 0, 1, 0, 0, 1];
        assert_eq!(auroc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(
            auroc(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            auroc(&[0.1, 0.2], &[0, 0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn midrank_equals_pairwise_oracle_exactly_with_heavy_ties() {
        let mut rng = Rng::new(60);
        for case in 0..50 {
            let n = 2 + rng.below(199) as usize;
            // Integer grid scores force plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.below(6) as f64).collect();
            let mut labels: Vec<usize> = (0..n).map(|_| rng.below(2) as usize).collect();
            labels[0] = 1;
            if n > 1 {
                labels[1] = 0;
            }
            let fast = auroc(&scores, &labels).unwrap();
            let slow = pairwise_auroc(&scores, &labels);
            assert_eq!(fast.to_bits(), slow.to_bits(), "case {case} n={n}");
        }
    }

    #[test]
    fn invariant_under_strictly_monotone_transforms() {
        let scores = [0.1, 0.4, 0.35, 0.8, 0.65];
        let labels = [0, 0, 1, 1, 0];
        let base = auroc(&scores, &labels).unwrap();
        let exp_scores: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let affine_scores: Vec<f64> = scores.iter().map(|s| 3.0 * s - 7.0).collect();
        assert_eq!(auroc(&exp_scores, &labels).unwrap(), base);
        assert_eq!(auroc(&affine_scores, &labels).unwrap(), base);
    }

    #[test]
    fn negating_scores_complements_auroc_without_ties() {
        let scores = [0.1, 0.2, 0.35, 0.8, 0.65, 0.9];
        let labels = [0, 1, 1, 1, 0, 0];
        let a = auroc(&scores, &labels).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let b = auroc(&neg, &labels).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_is_deterministic_and_tight_for_perfect_scores() {
        let scores = [0.9, 0.8, 0.7, 0.3, 0.2, 0.1];
        let labels = [1, 1, 1, 0, 0, 0];
        let (lo, hi) = bootstrap_ci(&scores, &labels, 200, 4).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
        let again = bootstrap_ci(&scores, &labels, 200, 4).unwrap();
        assert_eq!((lo, hi), again);
        let other_seed = bootstrap_ci(&[0.9, 0.4, 0.6, 0.3], &[1, 0, 1, 0], 50, 5).unwrap();
        let other_seed2 = bootstrap_ci(&[0.9, 0.4, 0.6, 0.3], &[1, 0, 1, 0], 50, 5).unwrap();
        assert_eq!(other_seed, other_seed2);
    }

    #[test]
    fn bootstrap_interval_shrinks_with_sample_size() {
        let mut widths = Vec::new();
        for &n in &[100usize, 1000, 10000] {
            let mut rng = Rng::new(8);
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let l = i % 2;
                labels.push(l);
                // Overlapping class score distributions.
                scores.push(if l == 1 { 0.5 + 0.5 * rng.normal() } else { 0.5 * rng.normal() });
            }
            let (lo, hi) = bootstrap_ci(&scores, &labels, 300, 13).unwrap();
            widths.push(hi - lo);
        }
        assert!(
            widths[0] > widths[1] && widths[1] > widths[2],
            "widths should shrink: {widths:?}"
        );
    }

    #[test]
    fn thresholded_metrics_for_a_perfect_classifier() {
        let scores = [0.9, 0.8, 0.1, 0.2];
        let labels = [1, 1, 0, 0];
        let m = thresholded_metrics(&scores, &labels, 0.5).unwrap();
        assert_eq!(
            m,
            ThresholdedMetrics {
                balanced_accuracy: 1.0,
                f1: 1.0,
                precision: 1.0,
                recall: 1.0,
                degenerate: false
            }
        );
    }

    #[test]
    fn predict_all_positive_has_full_recall_and_prevalence_precision() {
        let scores = [0.9, 0.9, 0.9, 0.9, 0.9];
        let labels = [1, 0, 0, 1, 0];
        let m = thresholded_metrics(&scores, &labels, 0.5).unwrap();
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.precision, 0.4);
        assert_eq!(m.balanced_accuracy, 0.5);
        assert!(!m.degenerate);
    }

    #[test]
    fn hand_built_confusion_matrix() {
        // 10 samples, threshold 0.5: TP=3, FN=2, FP=1, TN=4.
        let scores = [0.9, 0.7, 0.6, 0.4, 0.2, 0.8, 0.3, 0.1, 0.45, 0.05];
        let labels = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let m = thresholded_metrics(&scores, &labels, 0.5).unwrap();
        assert!((m.recall - 0.6).abs() < 1e-15);
        assert!((m.precision - 0.75).abs() < 1e-15);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
        assert!((m.balanced_accuracy - (0.6 + 0.8) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_denominator_reports_zero_with_a_flag() {
        // No positive predictions: precision and F1 degenerate.
        let scores = [0.1, 0.2, 0.3, 0.4];
        let labels = [1, 0, 1, 0];
        let m = thresholded_metrics(&scores, &labels, 0.9).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(m.degenerate);
    }

    #[test]
    fn formatter_reproduces_table_cell_style() {
        assert_eq!(format_point_ci(0.933, 0.912, 0.956), "93.3 [91.2, 95.6]");
        assert_eq!(format_point_ci(1.0, 0.999, 1.0), "100.0 [99.9, 100.0]");
        let report = MetricsReport {
            auroc: 0.933,
            auroc_ci_low: 0.912,
            auroc_ci_high: 0.956,
            balanced_accuracy: 0.8,
            f1: 0.8,
            precision: 0.8,
            recall: 0.8,
            threshold: 0.5,
            n_bootstrap: 1000,
            seed: 0,
            degenerate_threshold_metrics: false,
        };
        assert_eq!(report.formatted_auroc(), "93.3 [91.2, 95.6]");
    }

    #[test]
    fn report_compute_is_deterministic_and_serializable() {
        let scores = [0.9, 0.4, 0.6, 0.3, 0.7, 0.2];
        let labels = [1, 0, 1, 0, 1, 0];
        let a = MetricsReport::compute(&scores, &labels, 0.5, 100, 21).unwrap();
        let b = MetricsReport::compute(&scores, &labels, 0.5, 100, 21).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(a.auroc_ci_low <= a.auroc_ci_high);
    }
}
