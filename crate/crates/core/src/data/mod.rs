//! Datasets, splits, and seeded mini-batching.

pub mod io;
pub mod synthetic;

pub use io::{load_binary, load_csv, load_dataset, save_binary, save_csv, CsvSchema};
pub use synthetic::{bayes_auroc_two_gaussians, two_gaussians, two_moons};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, stream, Matrix, Rng};

/// Which part of the protocol a row belongs to. Only train rows are ever
/// batched or noise-injected; val drives model selection; test is touched
/// once for the final report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!(
                "unknown split '{other}' (expected train, val, or test)"
            ))),
        }
    }
}

/// Feature matrix, integer labels, per-row split tags, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub splits: Vec<Split>,
    pub num_classes: usize,
    /// Free-text source descriptor (generator parameters, file path, ...).
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Row indices belonging to a split, in row order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.splits.iter().filter(|&&s| s == split).count()
    }

    /// Features and labels of one split as a contiguous batch, with the
    /// original row indices.
    pub fn split_rows(&self, split: Split) -> (Matrix, Vec<usize>, Vec<usize>) {
        let indices = self.split_indices(split);
        let mut features = Matrix::zeros(indices.len(), self.dim());
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            features.row_mut(r).copy_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        (features, labels, indices)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.len() || self.splits.len() != self.len() {
            return Err(Error::Shape(format!(
                "dataset rows/labels/splits disagree: {} features, {} labels, {} splits",
                self.len(),
                self.labels.len(),
                self.splits.len()
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        for &l in &self.labels {
            if l >= self.num_classes {
                return Err(Error::InvalidLabel { label: l, num_classes: self.num_classes });
            }
        }
        if !self.features.is_finite() {
            return Err(Error::InvalidInput("dataset features contain non-finite values".into()));
        }
        Ok(())
    }

    /// Validation for training: additionally requires every split non-empty.
    pub fn validate_for_training(&self) -> Result<()> {
        self.validate()?;
        for split in Split::ALL {
            if self.split_len(split) == 0 {
                return Err(Error::InvalidConfig(format!("{} split is empty", split.name())));
            }
        }
        Ok(())
    }
}

/// Mini-batch schedule: shuffled every epoch from a seed, visiting every row
/// of the split exactly once (the last partial batch is kept by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchIterator {
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub drop_last: bool,
}

impl BatchIterator {
    pub fn new(batch_size: usize, seed: u64) -> Self {
        BatchIterator { batch_size, seed, drop_last: false }
    }
}

/// One mini-batch with its original dataset row indices, so telemetry can be
/// traced back to individual samples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
}

/// Mini-batches of one split for one epoch. The permutation is determined by
/// `(iterator.seed, epoch)` alone, so identical calls produce identical
/// batches and different epochs produce independent shuffles.
pub fn batches(
    dataset: &Dataset,
    split: Split,
    iterator: &BatchIterator,
    epoch: usize,
) -> Result<Vec<Batch>> {
    if iterator.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
    }
    let mut indices = dataset.split_indices(split);
    if indices.is_empty() {
        return Err(Error::InvalidConfig(format!("{} split is empty", split.name())));
    }
    let mut rng = Rng::new(derive_seed(iterator.seed, &[stream::SHUFFLE, epoch as u64]));
    rng.shuffle(&mut indices);

    let mut out = Vec::new();
    for chunk in indices.chunks(iterator.batch_size) {
        if iterator.drop_last && chunk.len() < iterator.batch_size {
            break;
        }
        let mut features = Matrix::zeros(chunk.len(), dataset.dim());
        let mut labels = Vec::with_capacity(chunk.len());
        for (r, &i) in chunk.iter().enumerate() {
            features.row_mut(r).copy_from_slice(dataset.features.row(i));
            labels.push(dataset.labels[i]);
        }
        out.push(Batch { features, labels, indices: chunk.to_vec() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn toy_dataset(n: usize) -> Dataset {
        let features =
            Matrix::from_vec(n, 2, (0..2 * n).map(|i| i as f64).collect()).unwrap();
        let labels = (0..n).map(|i| i % 2).collect();
        // Roughly 60/20/20.
        let splits = (0..n)
            .map(|i| match i % 5 {
                0 | 1 | 2 => Split::Train,
                3 => Split::Val,
                _ => Split::Test,
            })
            .collect();
        Dataset { features, labels, splits, num_classes: 2, provenance: "toy".to_string() }
    }

    #[test]
    fn split_indices_partition_the_rows() {
        let ds = toy_dataset(23);
        let mut all: Vec<usize> = Split::ALL
            .iter()
            .flat_map(|&s| ds.split_indices(s))
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn validation_catches_bad_labels_and_empty_splits() {
        let mut ds = toy_dataset(10);
        ds.labels[3] = 7;
        assert!(matches!(ds.validate(), Err(Error::InvalidLabel { .. })));

        let mut ds = toy_dataset(10);
        for s in &mut ds.splits {
            *s = Split::Train;
        }
        assert!(ds.validate().is_ok());
        assert!(ds.validate_for_training().is_err());
    }

    #[test]
    fn oversized_batch_returns_a_single_batch_of_all_rows() {
        let ds = toy_dataset(20);
        let it = BatchIterator::new(1000, 3);
        let bs = batches(&ds, Split::Train, &it, 0).unwrap();
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].features.rows(), ds.split_len(Split::Train));
    }

    #[test]
    fn same_seed_and_epoch_reproduce_the_same_order() {
        let ds = toy_dataset(40);
        let it = BatchIterator::new(7, 9);
        let a = batches(&ds, Split::Train, &it, 4).unwrap();
        let b = batches(&ds, Split::Train, &it, 4).unwrap();
        let idx = |bs: &[Batch]| bs.iter().flat_map(|b| b.indices.clone()).collect::<Vec<_>>();
        assert_eq!(idx(&a), idx(&b));
        let c = batches(&ds, Split::Train, &it, 5).unwrap();
        assert_ne!(idx(&a), idx(&c), "different epochs should shuffle differently");
    }

    #[test]
    fn zero_batch_size_is_rejected() {
        let ds = toy_dataset(10);
        let it = BatchIterator::new(0, 1);
        assert!(batches(&ds, Split::Train, &it, 0).is_err());
    }

    #[test]
    fn drop_last_discards_partial_batches() {
        let ds = toy_dataset(20); // 12 train rows
        let mut it = BatchIterator::new(5, 1);
        it.drop_last = true;
        let bs = batches(&ds, Split::Train, &it, 0).unwrap();
        assert_eq!(bs.len(), 2);
        assert!(bs.iter().all(|b| b.features.rows() == 5));
    }

    proptest! {
        #[test]
        fn every_epoch_visits_each_train_row_exactly_once(
            n in 5usize..60,
            batch_size in 1usize..20,
            seed in 0u64..1000,
            epoch in 0usize..5,
        ) {
            let ds = toy_dataset(n);
            let it = BatchIterator::new(batch_size, seed);
            let bs = batches(&ds, Split::Train, &it, epoch).unwrap();
            let mut seen: Vec<usize> = bs.iter().flat_map(|b| b.indices.clone()).collect();
            seen.sort_unstable();
            let mut expected = ds.split_indices(Split::Train);
            expected.sort_unstable();
            prop_assert_eq!(seen, expected);
            // Batch contents match the dataset rows they claim to be.
            for b in &bs {
                for (r, &i) in b.indices.iter().enumerate() {
                    prop_assert_eq!(b.features.row(r), ds.features.row(i));
                    prop_assert_eq!(b.labels[r], ds.labels[i]);
                }
            }
        }
    }
}
