//! Minimal dense numeric kernel: matrices, seeded RNG, stable softmax, and
//! the finite-difference oracle. Everything downstream builds on this module
//! and nothing here knows about losses, models, or experiments.

pub mod finite_diff;
pub mod matrix;
pub mod rng;
pub mod softmax;
pub mod special;

pub use finite_diff::{finite_diff_grad, grad_rel_err, max_grad_rel_err};
pub use matrix::{relu, relu_backward, Matrix};
pub use rng::{derive_seed, stream, Rng};
pub use softmax::{log_softmax, log_softmax_rows, softmax_rows, softmax_stable};
pub use special::normal_cdf;
