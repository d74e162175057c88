//! Synthetic binary datasets with known structure: two isotropic Gaussians
//! (whose Bayes-optimal AUROC has a closed form) and two interleaved moons.

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, normal_cdf, stream, Matrix, Rng};

fn check_counts(n_per_split: [usize; 3]) -> Result<()> {
    if n_per_split.iter().any(|&n| n == 0) {
        return Err(Error::InvalidConfig(
            "each split needs at least one sample".to_string(),
        ));
    }
    Ok(())
}

/// Two Gaussian classes at means `±mu` with shared isotropic deviation
/// `sigma`. Labels alternate within each split so both classes are always
/// present; batching reshuffles anyway.
pub fn two_gaussians(
    n_per_split: [usize; 3],
    mu: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    check_counts(n_per_split)?;
    if mu.is_empty() {
        return Err(Error::InvalidConfig("mu must have at least one coordinate".to_string()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("mu and sigma must be finite, sigma >= 0".to_string()));
    }
    let dim = mu.len();
    let total: usize = n_per_split.iter().sum();
    let mut rng = Rng::new(derive_seed(seed, &[stream::SYNTH]));
    let mut features = Matrix::zeros(total, dim);
    let mut labels = Vec::with_capacity(total);
    let mut splits = Vec::with_capacity(total);
    let mut row = 0;
    for (split, &n) in Split::ALL.iter().zip(&n_per_split) {
        for i in 0..n {
            let label = i % 2;
            let sign = if label == 1 { 1.0 } else { -1.0 };
            let out = features.row_mut(row);
            for (x, &m) in out.iter_mut().zip(mu) {
                *x = sign * m + sigma * rng.normal();
            }
            labels.push(label);
            splits.push(*split);
            row += 1;
        }
    }
    Ok(Dataset {
        features,
        labels,
        splits,
        num_classes: 2,
        provenance: format!(
            "two_gaussians(dim={dim}, mu={mu:?}, sigma={sigma}, n={n_per_split:?}, seed={seed})"
        ),
    })
}

/// Closed-form AUROC of the Bayes-optimal score for [`two_gaussians`].
///
/// The optimal discriminant is linear, `s(x) = μᵀx`, distributed as
/// `N(±‖μ‖², σ²‖μ‖²)` under the two classes, so
/// `AUROC = Φ(2‖μ‖² / (σ‖μ‖√2)) = Φ(√2·‖μ‖/σ)`.
pub fn bayes_auroc_two_gaussians(mu: &[f64], sigma: f64) -> f64 {
    let norm = mu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.5;
    }
    if sigma == 0.0 {
        return 1.0;
    }
    normal_cdf(std::f64::consts::SQRT_2 * norm / sigma)
}

/// Two interleaved half-circles with Gaussian coordinate noise; the classic
/// non-linearly-separable 2-D benchmark.
pub fn two_moons(n_per_split: [usize; 3], noise: f64, seed: u64) -> Result<Dataset> {
    check_counts(n_per_split)?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise must be >= 0, got {noise}")));
    }
    let total: usize = n_per_split.iter().sum();
    let mut rng = Rng::new(derive_seed(seed, &[stream::SYNTH]));
    let mut features = Matrix::zeros(total, 2);
    let mut labels = Vec::with_capacity(total);
    let mut splits = Vec::with_capacity(total);
    let mut row = 0;
    for (split, &n) in Split::ALL.iter().zip(&n_per_split) {
        for i in 0..n {
            let label = i % 2;
            let t = std::f64::consts::PI * rng.uniform();
            let (mut x, mut y) = if label == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            x += noise * rng.normal();
            y += noise * rng.normal();
            let out = features.row_mut(row);
            out[0] = x;
            out[1] = y;
            labels.push(label);
            splits.push(*split);
            row += 1;
        }
    }
    Ok(Dataset {
        features,
        labels,
        splits,
        num_classes: 2,
        provenance: format!("two_moons(noise={noise}, n={n_per_split:?}, seed={seed})"),
    })
}
