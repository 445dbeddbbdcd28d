//! Batch-means Monte Carlo machinery and a few scalar helpers.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rng::{self, Rng};

/// Number of batches used for every batch-means standard error.
pub const BATCHES: usize = 32;

/// A Monte-Carlo quantity with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Estimate {
    /// `|value - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    /// Distance from `target` measured in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.std_error
    }
}

/// Per-batch sums of several jointly sampled quantities.
///
/// Batch `b` draws from stream `b` of the seed; quantities accumulated in
/// the same closure share their random numbers.
#[derive(Debug, Clone)]
pub struct BatchSums {
    counts: Vec<usize>,
    sums: Vec<Vec<f64>>,
    seed: u64,
}

/// Split `total` draws into [`BATCHES`] near-equal batches and accumulate
/// `quantities` running sums in each. `f(rng, count, sums)` must add exactly
/// `count` observations of every quantity into `sums`.
pub fn run_batches<F>(seed: u64, total: usize, quantities: usize, f: F) -> BatchSums
where
    F: Fn(&mut Rng, usize, &mut [f64]) + Sync,
{
    let counts = batch_sizes(total);
    let sums = counts
        .par_iter()
        .enumerate()
        .map(|(b, &count)| {
            let mut acc = vec![0.0; quantities];
            if count > 0 {
                let mut rng = rng::stream(seed, b as u64);
                f(&mut rng, count, &mut acc);
            }
            acc
        })
        .collect();
    BatchSums { counts, sums, seed }
}

/// Sizes of the [`BATCHES`] batches for `total` draws (differ by at most one).
pub fn batch_sizes(total: usize) -> Vec<usize> {
    let base = total / BATCHES;
    let extra = total % BATCHES;
    (0..BATCHES)
        .map(|b| base + usize::from(b < extra))
        .collect()
}

impl BatchSums {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn quantities(&self) -> usize {
        self.sums.first().map_or(0, Vec::len)
    }

    fn mean_of(&self, coeffs: &[f64]) -> f64 {
        let total = self.total() as f64;
        self.sums
            .iter()
            .map(|s| s.iter().zip(coeffs).map(|(v, c)| v * c).sum::<f64>())
            .sum::<f64>()
            / total
    }

    /// Overall means of every quantity.
    pub fn means(&self) -> Vec<f64> {
        let q = self.quantities();
        (0..q).map(|i| self.mean(i)).collect()
    }

    pub fn mean(&self, q: usize) -> f64 {
        let total = self.total() as f64;
        self.sums.iter().map(|s| s[q]).sum::<f64>() / total
    }

    /// Batch-means covariance of the overall means of quantities `a` and `b`.
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        let mut ca = vec![0.0; self.quantities()];
        let mut cb = ca.clone();
        ca[a] = 1.0;
        cb[b] = 1.0;
        self.combined_covariance(&ca, &cb)
    }

    /// Batch-means covariance of two linear combinations of the means,
    /// formed batch by batch so that shared randomness cancels exactly.
    fn combined_covariance(&self, ca: &[f64], cb: &[f64]) -> f64 {
        let used = self.counts.iter().filter(|&&c| c > 0).count();
        if used < 2 {
            return f64::NAN;
        }
        let total = self.total() as f64;
        let (ma, mb) = (self.mean_of(ca), self.mean_of(cb));
        let dot = |s: &[f64], c: &[f64]| s.iter().zip(c).map(|(v, k)| v * k).sum::<f64>();
        let mut acc = 0.0;
        for (s, &c) in self.sums.iter().zip(&self.counts) {
            if c == 0 {
                continue;
            }
            let cf = c as f64;
            acc += cf * (dot(s, ca) / cf - ma) * (dot(s, cb) / cf - mb);
        }
        acc / ((used as f64 - 1.0) * total)
    }

    pub fn estimate(&self, q: usize) -> Estimate {
        let mut coeffs = vec![0.0; self.quantities()];
        coeffs[q] = 1.0;
        self.estimate_linear(&coeffs)
    }

    /// Estimate of `Σ coeffs[q] · E[quantity q]`, with the standard error of
    /// the combination (so shared randomness cancels).
    pub fn estimate_linear(&self, coeffs: &[f64]) -> Estimate {
        assert_eq!(coeffs.len(), self.quantities());
        let value = self.mean_of(coeffs);
        self.make(value, self.combined_covariance(coeffs, coeffs))
    }

    /// Delta-method estimate of a smooth function of the means, given its
    /// value and gradient at the overall means.
    pub fn estimate_delta(&self, value: f64, gradient: &[f64]) -> Estimate {
        assert_eq!(gradient.len(), self.quantities());
        self.make(value, self.combined_covariance(gradient, gradient))
    }

    fn make(&self, value: f64, var: f64) -> Estimate {
        Estimate {
            value,
            std_error: var.max(0.0).sqrt(),
            n_samples: self.total(),
            seed: self.seed,
        }
    }
}

/// Mean and standard error of independent observations.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Linear-interpolated quantile of sorted data at probability `u`
/// (type-7 convention).
pub fn sorted_quantile(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = u.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
