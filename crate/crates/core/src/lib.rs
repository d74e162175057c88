//! Noise-robust binary classification at desk scale.
//!
//! This crate trains small feedforward networks under label noise with a
//! family of noise-robust losses, the centerpiece being an informed
//! abstention objective: the network gets an extra "abstain" output whose
//! batch-mean probability is pulled toward an externally supplied noise
//! estimate, letting the model skip learning the corrupted fraction of the
//! training set. Alongside it live the classic baselines (cross entropy,
//! symmetric cross entropy, a ramped abstention loss, and three
//! normalized/asymmetric robust losses), all with analytic gradients that are
//! verified against central finite differences.
//!
//! The rest of the crate is the infrastructure needed to run honest
//! experiments on that idea: an exact-count label-noise injector with undo
//! records, a from-scratch MLP and SGD trainer following a fixed milestone
//! schedule, tie-aware AUROC with bootstrap confidence intervals, synthetic
//! dataset generators with known Bayes-optimal scores, and a deterministic
//! experiment/grid harness whose outputs are byte-identical across reruns and
//! parallelism settings.

pub mod data;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod numerics;
pub mod optim;

pub use error::{Error, Result};
