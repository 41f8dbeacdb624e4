//! Seeded synthetic weight generation for tests and benchmarks.
//!
//! Weight matrices in practice are near-Gaussian around zero, occasionally
//! distorted by outliers or a heavy one-sided tail; the generators here
//! reproduce those three regimes deterministically from a 64-bit seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Weight distribution families understood by [`synth_weights`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Gaussian {
        mean: f64,
        std: f64,
    },
    /// Gaussian base with exactly `outlier_count` entries overwritten by
    /// `+/-outlier_magnitude` at seeded positions.
    GaussianWithOutliers {
        mean: f64,
        std: f64,
        outlier_count: usize,
        outlier_magnitude: f64,
    },
    /// Gaussian bulk plus a rare one-sided heavy tail, tuned until the sample
    /// skewness lands within 0.25 of `skew_target`.
    Skewed {
        skew_target: f64,
    },
}

/// Generate a `rows x cols` tensor for the given distribution and seed.
/// The same `(rows, cols, distribution, seed)` always yields identical data.
pub fn synth_weights(
    name: impl Into<String>,
    rows: usize,
    cols: usize,
    dist: Distribution,
    seed: u64,
) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDistribution(format!(
            "shape {rows}x{cols} must be positive"
        )));
    }
    let n = rows * cols;
    let data = match dist {
        Distribution::Gaussian { mean, std } => {
            let normal = valid_normal(mean, std)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
        }
        Distribution::GaussianWithOutliers {
            mean,
            std,
            outlier_count,
            outlier_magnitude,
        } => {
            if outlier_count > n {
                return Err(Error::InvalidDistribution(format!(
                    "outlier_count {outlier_count} exceeds element count {n}"
                )));
            }
            if outlier_magnitude <= 0.0 {
                return Err(Error::InvalidDistribution(
                    "outlier_magnitude must be positive".into(),
                ));
            }
            let normal = valid_normal(mean, std)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data: Vec<f32> = (0..n).map(|_| normal.sample(&mut rng) as f32).collect();
            // Distinct seeded positions, then a seeded sign per outlier.
            let mut placed = 0usize;
            let mut used = vec![false; n];
            while placed < outlier_count {
                let idx = rng.random_range(0..n);
                if used[idx] {
                    continue;
                }
                used[idx] = true;
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                data[idx] = (sign * outlier_magnitude) as f32;
                placed += 1;
            }
            data
        }
        Distribution::Skewed { skew_target } => skewed_samples(n, skew_target, seed)?,
    };
    Tensor::new(name, rows, cols, data)
}

fn valid_normal(mean: f64, std: f64) -> Result<Normal<f64>> {
    if std <= 0.0 || !std.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidDistribution(format!(
            "gaussian(mean={mean}, std={std})"
        )));
    }
    Normal::new(mean, std).map_err(|e| Error::InvalidDistribution(e.to_string()))
}

/// Sample skewness (Fisher g1) with population moments, in f64.
pub(crate) fn sample_skewness(data: &[f32]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    for &v in data {
        let d = v as f64 - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 == 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Two-component mixture: N(0,1) bulk with a shifted half-normal tail on the
/// side of the target. The tail offset is bisected until the realized sample
/// skewness is within 0.25 of the target.
fn skewed_samples(n: usize, target: f64, seed: u64) -> Result<Vec<f32>> {
    if !target.is_finite() {
        return Err(Error::InvalidDistribution("skew target not finite".into()));
    }
    let tol = 0.25;
    let side = if target < 0.0 { -1.0 } else { 1.0 };
    // Tail probability chosen so the asymptotic skewness ~ 1/sqrt(p) leaves
    // headroom above |target|.
    let p = (0.5 / (1.0 + target * target)).clamp(1e-4, 0.5);

    let generate = |offset: f64| -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                let base: f64 = normal.sample(&mut rng);
                if rng.random_bool(p) {
                    (side * (offset + base.abs())) as f32
                } else {
                    base as f32
                }
            })
            .collect()
    };

    if target == 0.0 {
        return Ok(generate(0.0));
    }

    // Bisection on the tail offset: skewness magnitude grows monotonically
    // with it until the 1/sqrt(p) asymptote.
    let (mut lo, mut hi) = (0.0f64, 4.0f64);
    let mut best = generate(0.0);
    let mut best_err = (sample_skewness(&best) - target).abs();
    for _ in 0..60 {
        if best_err <= tol {
            return Ok(best);
        }
        // Expand the bracket until the target magnitude is covered.
        let hi_skew = sample_skewness(&generate(hi));
        if hi_skew.abs() < target.abs() && hi < 1e6 {
            lo = hi;
            hi *= 2.0;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let data = generate(mid);
        let skew = sample_skewness(&data);
        let err = (skew - target).abs();
        if err < best_err {
            best = data;
            best_err = err;
        }
        if skew.abs() < target.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best_err <= tol {
        Ok(best)
    } else {
        Err(Error::InvalidDistribution(format!(
            "skew target {target} unreachable (best error {best_err:.3})"
        )))
    }
}
