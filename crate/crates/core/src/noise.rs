//! Symmetric label-noise injection for the training split, with an exact
//! record of every flip so the corruption is auditable and reversible.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, stream, Rng};

/// Everything needed to audit or undo one injection pass.
///
/// `flipped_indices` are dataset row indices in ascending order;
/// `original_labels[i]` is the pre-flip label of `flipped_indices[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseRecord {
    pub rate: f64,
    pub seed: u64,
    pub flipped_indices: Vec<usize>,
    pub original_labels: Vec<usize>,
}

/// Flips exactly `round(rate * n_train)` training labels, each to a label
/// drawn uniformly from the other `k - 1` classes. Val and test rows are
/// never touched. The flipped set depends only on `(seed, train split)`,
/// not on the labels, so with two classes a second pass with the same seed
/// flips the same rows back.
pub fn inject_noise(dataset: &Dataset, rate: f64, seed: u64) -> Result<(Dataset, NoiseRecord)> {
    if !(0.0..=1.0).contains(&rate) || !rate.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise rate must be in [0, 1], got {rate}"
        )));
    }
    dataset.validate()?;
    let k = dataset.num_classes;
    if k < 2 {
        return Err(Error::InvalidConfig(
            "noise injection needs at least 2 classes".to_string(),
        ));
    }

    let train = dataset.split_indices(Split::Train);
    let n_flips = (rate * train.len() as f64).round() as usize;
    let mut rng = Rng::new(derive_seed(seed, &[stream::NOISE]));

    let mut pool = train;
    rng.shuffle(&mut pool);
    let mut flipped_indices: Vec<usize> = pool.into_iter().take(n_flips).collect();
    flipped_indices.sort_unstable();

    let mut noisy = dataset.clone();
    let mut original_labels = Vec::with_capacity(n_flips);
    for &row in &flipped_indices {
        let original = dataset.labels[row];
        original_labels.push(original);
        // Uniform over the other k - 1 classes: draw from [0, k - 2] and
        // skip over the original label.
        let draw = rng.below(k as u64 - 1) as usize;
        noisy.labels[row] = if draw >= original { draw + 1 } else { draw };
    }

    Ok((
        noisy,
        NoiseRecord {
            rate,
            seed,
            flipped_indices,
            original_labels,
        },
    ))
}

/// Restores the pre-injection labels recorded in `record`.
pub fn revert_noise(dataset: &Dataset, record: &NoiseRecord) -> Result<Dataset> {
    if record.flipped_indices.len() != record.original_labels.len() {
        return Err(Error::InvalidInput(format!(
            "noise record lists {} indices but {} labels",
            record.flipped_indices.len(),
            record.original_labels.len()
        )));
    }
    let mut clean = dataset.clone();
    for (&row, &label) in record.flipped_indices.iter().zip(&record.original_labels) {
        if row >= dataset.len() {
            return Err(Error::InvalidInput(format!(
                "noise record index {row} out of range for {} rows",
                dataset.len()
            )));
        }
        if label >= dataset.num_classes {
            return Err(Error::InvalidLabel {
                label,
                num_classes: dataset.num_classes,
            });
        }
        clean.labels[row] = label;
    }
    Ok(clean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use proptest::prelude::*;

    fn fixture(n: usize, num_classes: usize) -> Dataset {
        let features = Matrix::from_vec(n, 2, (0..2 * n).map(|v| v as f64).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
        // Roughly 60/20/20 split by row position.
        let splits: Vec<Split> = (0..n)
            .map(|i| match i % 5 {
                0 | 1 | 2 => Split::Train,
                3 => Split::Val,
                _ => Split::Test,
            })
            .collect();
        Dataset {
            features,
            labels,
            splits,
            num_classes,
            provenance: "fixture".to_string(),
        }
    }

    #[test]
    fn rate_zero_changes_nothing() {
        let ds = fixture(50, 3);
        let (noisy, record) = inject_noise(&ds, 0.0, 7).unwrap();
        assert_eq!(noisy.labels, ds.labels);
        assert!(record.flipped_indices.is_empty());
        assert!(record.original_labels.is_empty());
    }

    #[test]
    fn flip_count_is_exact_and_deterministic() {
        let mut ds = fixture(1000, 2);
        ds.splits = vec![Split::Train; 1000];
        let (noisy_a, record_a) = inject_noise(&ds, 0.07, 11).unwrap();
        let (noisy_b, record_b) = inject_noise(&ds, 0.07, 11).unwrap();
        assert_eq!(record_a.flipped_indices.len(), 70);
        assert_eq!(record_a, record_b);
        assert_eq!(noisy_a.labels, noisy_b.labels);

        let (_, record_c) = inject_noise(&ds, 0.07, 12).unwrap();
        assert_ne!(record_a.flipped_indices, record_c.flipped_indices);
    }

    #[test]
    fn only_train_rows_are_flipped() {
        let ds = fixture(200, 4);
        let (noisy, record) = inject_noise(&ds, 1.0, 3).unwrap();
        for (i, (&old, &new)) in ds.labels.iter().zip(&noisy.labels).enumerate() {
            match ds.splits[i] {
                Split::Train => {
                    assert_ne!(old, new, "train row {i} must flip at rate 1");
                    assert!(record.flipped_indices.binary_search(&i).is_ok());
                }
                _ => assert_eq!(old, new, "non-train row {i} must not change"),
            }
        }
    }

    #[test]
    fn flipped_labels_stay_in_range_and_differ() {
        let ds = fixture(300, 5);
        let (noisy, record) = inject_noise(&ds, 0.5, 9).unwrap();
        for (pos, &row) in record.flipped_indices.iter().enumerate() {
            assert!(noisy.labels[row] < 5);
            assert_ne!(noisy.labels[row], record.original_labels[pos]);
            assert_eq!(record.original_labels[pos], ds.labels[row]);
        }
    }

    #[test]
    fn indices_are_sorted_and_unique() {
        let ds = fixture(500, 3);
        let (_, record) = inject_noise(&ds, 0.4, 21).unwrap();
        assert!(record.flipped_indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn binary_double_injection_with_same_seed_restores_labels() {
        // The flipped set depends only on the seed and split, and with two
        // classes the only possible flip is an involution.
        let ds = fixture(400, 2);
        let (noisy, first) = inject_noise(&ds, 1.0, 17).unwrap();
        let (restored, second) = inject_noise(&noisy, 1.0, 17).unwrap();
        assert_eq!(first.flipped_indices, second.flipped_indices);
        assert_eq!(restored.labels, ds.labels);
    }

    #[test]
    fn revert_restores_the_original_dataset() {
        let ds = fixture(250, 4);
        let (noisy, record) = inject_noise(&ds, 0.6, 5).unwrap();
        assert_ne!(noisy.labels, ds.labels);
        let clean = revert_noise(&noisy, &record).unwrap();
        assert_eq!(clean.labels, ds.labels);
        assert_eq!(clean.features, ds.features);
    }

    #[test]
    fn revert_rejects_corrupt_records() {
        let ds = fixture(50, 3);
        let (noisy, mut record) = inject_noise(&ds, 0.5, 5).unwrap();
        record.original_labels.pop();
        assert!(revert_noise(&noisy, &record).is_err());

        let (_, mut record) = inject_noise(&ds, 0.5, 5).unwrap();
        record.flipped_indices[0] = 5000;
        assert!(revert_noise(&noisy, &record).is_err());
    }

    #[test]
    fn rejects_bad_rates_and_degenerate_classes() {
        let ds = fixture(50, 3);
        assert!(inject_noise(&ds, -0.1, 1).is_err());
        assert!(inject_noise(&ds, 1.5, 1).is_err());
        assert!(inject_noise(&ds, f64::NAN, 1).is_err());
        let mut one_class = fixture(50, 3);
        one_class.num_classes = 1;
        one_class.labels = vec![0; 50];
        assert!(inject_noise(&one_class, 0.5, 1).is_err());
    }

    #[test]
    fn record_survives_json_round_trip() {
        let ds = fixture(120, 3);
        let (_, record) = inject_noise(&ds, 0.3, 77).unwrap();
        let json = serde_json::to_string(&record).unwrap();
        let back: NoiseRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, record);
    }

    proptest! {
        #[test]
        fn flip_count_matches_rounded_rate(
            rate in 0.0f64..=1.0,
            seed in 0u64..1000,
            n in 10usize..400,
        ) {
            let mut ds = fixture(n, 3);
            ds.splits = vec![Split::Train; n];
            let (_, record) = inject_noise(&ds, rate, seed).unwrap();
            let expected = (rate * n as f64).round() as usize;
            prop_assert_eq!(record.flipped_indices.len(), expected);
        }
    }
}
