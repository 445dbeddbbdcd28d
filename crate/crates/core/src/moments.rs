//! Monte-Carlo estimators for inner-product moments, the pair tensor,
//! thin-shell and quadratic-form variance, and halfspace Cheeger proxies.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::distributions::{sample, DistributionSpec, SampleMatrix, ROWS_PER_STREAM};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::metrics::MetricReport;
use crate::rng::{self, Rng};
use crate::stats::{mean_and_se, normal_pdf, run_batches, sorted_quantile, BatchSums, Estimate};

/// One CSV-ready Monte-Carlo record.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub quantity: String,
    pub family_p: String,
    pub family_q: String,
    pub n: usize,
    pub estimate: Estimate,
}

impl EstimateRecord {
    pub const CSV_HEADER: &'static str =
        "quantity,family_p,family_q,n,value,std_error,n_samples,seed";

    pub fn new(
        quantity: impl Into<String>,
        p: &DistributionSpec,
        q: Option<&DistributionSpec>,
        estimate: Estimate,
    ) -> Self {
        EstimateRecord {
            quantity: quantity.into(),
            family_p: p.family().name().to_string(),
            family_q: q.map_or(String::new(), |q| q.family().name().to_string()),
            n: p.dim(),
            estimate,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{:e},{},{}",
            self.quantity,
            self.family_p,
            self.family_q,
            self.n,
            self.estimate.value,
            self.estimate.std_error,
            self.estimate.n_samples,
            self.estimate.seed
        )
    }
}

fn ensure_same_dim(p: &DistributionSpec, q: &DistributionSpec) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

fn ensure_count(count: usize, what: &str) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidArgument(format!("{what} must be at least 1")));
    }
    Ok(())
}

/// Run `f(x, y, sums)` over `pairs` independent pairs `x ~ p`, `y ~ q`.
pub fn pair_batches<F>(
    p: &DistributionSpec,
    q: &DistributionSpec,
    pairs: usize,
    seed: u64,
    quantities: usize,
    f: F,
) -> Result<BatchSums>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    ensure_same_dim(p, q)?;
    ensure_count(pairs, "pair count")?;
    let n = p.dim();
    Ok(run_batches(seed, pairs, quantities, |rng, count, acc| {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for _ in 0..count {
            p.draw_into(rng, &mut x);
            q.draw_into(rng, &mut y);
            f(&x, &y, acc);
        }
    }))
}

/// Run `f(x, sums)` over `samples` independent draws from `spec`.
pub fn single_batches<F>(
    spec: &DistributionSpec,
    samples: usize,
    seed: u64,
    quantities: usize,
    f: F,
) -> Result<BatchSums>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    ensure_count(samples, "sample count")?;
    let n = spec.dim();
    Ok(run_batches(seed, samples, quantities, |rng, count, acc| {
        let mut x = vec![0.0; n];
        for _ in 0..count {
            spec.draw_into(rng, &mut x);
            f(&x, acc);
        }
    }))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `xᵀ A y`, summed row by row so that `A = I` reproduces `dot(x, y)`.
pub fn bilinear(x: &[f64], a: &Mat, y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[(i, j)] * y[j];
        }
        s += x[i] * row;
    }
    s
}

/// Product of three factors in a canonical (sorted) order, so the result
/// does not depend on argument order.
pub fn sorted_product(mut f: [f64; 3]) -> f64 {
    f.sort_by(f64::total_cmp);
    f[0] * f[1] * f[2]
}

/// `⟨x, y⟩` for `pairs` independent pairs without storing the draws.
/// Block `k` of [`ROWS_PER_STREAM`] pairs comes from stream `k` of `seed`.
pub fn inner_products(
    p: &DistributionSpec,
    q: &DistributionSpec,
    pairs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    ensure_same_dim(p, q)?;
    ensure_count(pairs, "pair count")?;
    let n = p.dim();
    let mut out = vec![0.0; pairs];
    out.par_chunks_mut(ROWS_PER_STREAM)
        .enumerate()
        .for_each(|(k, block)| {
            let mut rng = rng::stream(seed, k as u64);
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            for v in block.iter_mut() {
                p.draw_into(&mut rng, &mut x);
                q.draw_into(&mut rng, &mut y);
                *v = dot(&x, &y);
            }
        });
    Ok(out)
}

/// `E⟨x, y⟩³` for independent `x ~ p`, `y ~ q`.
pub fn third_moment_inner(
    p: &DistributionSpec,
    q: &DistributionSpec,
    pairs: usize,
    seed: u64,
) -> Result<Estimate> {
    let sums = pair_batches(p, q, pairs, seed, 1, |x, y, acc| {
        let ip = dot(x, y);
        acc[0] += sorted_product([ip, ip, ip]);
    })?;
    Ok(sums.estimate(0))
}

fn check_tensor_args(spec: &DistributionSpec, mats: &[&Mat]) -> Result<()> {
    for m in mats {
        linalg::ensure_dim(m, spec.dim())?;
        linalg::ensure_symmetric(m)?;
    }
    Ok(())
}

/// `T(A, B, C) = E (xᵀAy)(xᵀBy)(xᵀCy)` with `x, y` independent draws of `spec`.
pub fn tensor_t(
    spec: &DistributionSpec,
    a: &Mat,
    b: &Mat,
    c: &Mat,
    pairs: usize,
    seed: u64,
) -> Result<Estimate> {
    check_tensor_args(spec, &[a, b, c])?;
    let sums = pair_batches(spec, spec, pairs, seed, 1, |x, y, acc| {
        acc[0] += sorted_product([bilinear(x, a, y), bilinear(x, b, y), bilinear(x, c, y)]);
    })?;
    Ok(sums.estimate(0))
}

/// `E(‖x‖ − √n)²`.
pub fn thin_shell(spec: &DistributionSpec, samples: usize, seed: u64) -> Result<Estimate> {
    let root_n = (spec.dim() as f64).sqrt();
    let sums = single_batches(spec, samples, seed, 1, |x, acc| {
        let r = dot(x, x).sqrt();
        acc[0] += (r - root_n).powi(2);
    })?;
    Ok(sums.estimate(0))
}

/// `Var(xᵀAx)`. Observations are centred at `Tr A`, the exact mean under an
/// isotropic law, which keeps the variance computation well conditioned.
pub fn quadratic_form_variance(
    spec: &DistributionSpec,
    a: &Mat,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_tensor_args(spec, &[a])?;
    let tr = a.trace();
    let sums = single_batches(spec, samples, seed, 2, |x, acc| {
        let v = bilinear(x, a, x) - tr;
        acc[0] += v;
        acc[1] += v * v;
    })?;
    Ok(variance_from_moments(&sums, 0, 1))
}

fn variance_from_moments(sums: &BatchSums, first: usize, second: usize) -> Estimate {
    let (m1, m2) = (sums.mean(first), sums.mean(second));
    let mut grad = vec![0.0; sums.quantities()];
    grad[first] = -2.0 * m1;
    grad[second] = 1.0;
    let n = sums.total() as f64;
    let bessel = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    let mut e = sums.estimate_delta((m2 - m1 * m1) * bessel, &grad);
    e.std_error *= bessel;
    e
}

/// Uniform random unit vector.
pub fn random_direction(rng: &mut Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

pub fn random_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::stream(rng::derive_seed(seed, "directions", 0), 0);
    (0..count).map(|_| random_direction(&mut rng, n)).collect()
}

/// Outcome of comparing the direction average of
/// `E⟨x,θ⟩⟨y,θ⟩⟨x,y⟩²` with `E⟨x,y⟩³ / n` on shared pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereIdentityReport {
    /// Average over the sampled directions.
    pub direction_average: f64,
    /// `(1/n) · E⟨x,y⟩³` on the same pairs.
    pub scaled_third_moment: f64,
    /// Standard error of the direction average over directions.
    pub direction_se: f64,
    pub per_direction: Vec<f64>,
    pub third_moment: Estimate,
    pub satisfied: bool,
}

impl SphereIdentityReport {
    pub fn to_metric_report(&self) -> MetricReport {
        let gap = (self.direction_average - self.scaled_third_moment).abs();
        MetricReport::new(
            "sphere_identity",
            gap,
            3.0 * self.direction_se,
            identity_tol(self),
        )
    }
}

fn identity_tol(r: &SphereIdentityReport) -> f64 {
    1e-12
        * r.scaled_third_moment
            .abs()
            .max(r.direction_average.abs())
            .max(1.0)
}

/// Average over uniform directions of `E⟨x,θ⟩⟨y,θ⟩⟨x,y⟩²` versus
/// `(1/n)E⟨x,y⟩³`, both evaluated on the same `x, y` pairs.
pub fn sphere_identity_check(
    spec: &DistributionSpec,
    samples: usize,
    directions: usize,
    seed: u64,
) -> Result<SphereIdentityReport> {
    ensure_count(directions, "direction count")?;
    let n = spec.dim();
    let dirs = random_directions(n, directions, seed);
    sphere_identity_along(spec, samples, &dirs, seed)
}

/// Same as [`sphere_identity_check`] with caller-supplied unit directions.
pub fn sphere_identity_along(
    spec: &DistributionSpec,
    samples: usize,
    dirs: &[Vec<f64>],
    seed: u64,
) -> Result<SphereIdentityReport> {
    ensure_count(dirs.len(), "direction count")?;
    let n = spec.dim();
    for d in dirs {
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
    }
    // Pair-averaged matrix S = E[⟨x,y⟩² x yᵀ] (last slot: ⟨x,y⟩³), so that
    // each direction's value is θᵀSθ on identical pairs.
    let sums = pair_batches(spec, spec, samples, seed, n * n + 1, |x, y, acc| {
        let ip = dot(x, y);
        let w = ip * ip;
        for i in 0..n {
            let wx = w * x[i];
            for j in 0..n {
                acc[i * n + j] += wx * y[j];
            }
        }
        acc[n * n] += ip * ip * ip;
    })?;
    let means = sums.means();
    let per_direction: Vec<f64> = dirs
        .iter()
        .map(|d| {
            let mut s = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += means[i * n + j] * d[j];
                }
                s += d[i] * row;
            }
            s
        })
        .collect();
    let (direction_average, direction_se) = mean_and_se(&per_direction);
    let direction_se = if direction_se.is_nan() {
        0.0
    } else {
        direction_se
    };
    let third_moment = sums.estimate(n * n);
    let scaled_third_moment = third_moment.value / n as f64;
    let mut report = SphereIdentityReport {
        direction_average,
        scaled_third_moment,
        direction_se,
        per_direction,
        third_moment,
        satisfied: false,
    };
    report.satisfied = report.to_metric_report().satisfied;
    Ok(report)
}

/// Halfspace Cheeger proxy: per direction, `(1/2) / f̂(median)` of the
/// projected sample; the estimate is the maximum over directions.
#[derive(Debug, Clone, PartialEq)]
pub struct CheegerEstimate {
    pub value: f64,
    pub direction_count: usize,
    pub per_direction: Vec<f64>,
}

/// Gaussian-kernel density at the sample median with Silverman's bandwidth.
pub fn density_at_median(projected: &mut [f64]) -> Result<f64> {
    if projected.is_empty() {
        return Err(Error::EmptySample);
    }
    projected.sort_by(f64::total_cmp);
    let n = projected.len() as f64;
    let median = sorted_quantile(projected, 0.5);
    let (_, se) = mean_and_se(projected);
    let sd = se * n.sqrt();
    let iqr = sorted_quantile(projected, 0.75) - sorted_quantile(projected, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if !(spread > 0.0) {
        spread = if sd > 0.0 { sd } else { 1.0 };
    }
    let h = 0.9 * spread * n.powf(-0.2);
    // Kernel mass beyond 9 bandwidths is below 1e-17 of its peak.
    let lo = projected.partition_point(|&v| v < median - 9.0 * h);
    let hi = projected.partition_point(|&v| v <= median + 9.0 * h);
    let s: f64 = projected[lo..hi]
        .iter()
        .map(|&v| normal_pdf((median - v) / h))
        .sum();
    Ok(s / (n * h))
}

/// [`CheegerEstimate`] from an existing sample along the given unit directions.
pub fn cheeger_along(sample: &SampleMatrix, dirs: &[Vec<f64>]) -> Result<CheegerEstimate> {
    ensure_count(dirs.len(), "direction count")?;
    let n = sample.cols();
    for d in dirs {
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
    }
    let per_direction = dirs
        .par_iter()
        .map(|d| {
            let mut proj: Vec<f64> = sample.iter_rows().map(|x| dot(x, d)).collect();
            density_at_median(&mut proj).map(|f| 0.5 / f)
        })
        .collect::<Result<Vec<f64>>>()?;
    let value = per_direction
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CheegerEstimate {
        value,
        direction_count: dirs.len(),
        per_direction,
    })
}

/// Halfspace Cheeger proxy over `direction_count` uniform random directions.
pub fn halfspace_cheeger(
    spec: &DistributionSpec,
    direction_count: usize,
    samples: usize,
    seed: u64,
) -> Result<CheegerEstimate> {
    ensure_count(direction_count, "direction count")?;
    let data = sample(spec, samples, seed)?;
    let dirs = random_directions(spec.dim(), direction_count, seed);
    cheeger_along(&data, &dirs)
}

/// Halfspace Cheeger proxy over the coordinate axes.
pub fn axis_cheeger(spec: &DistributionSpec, samples: usize, seed: u64) -> Result<CheegerEstimate> {
    let n = spec.dim();
    let data = sample(spec, samples, seed)?;
    let dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    cheeger_along(&data, &dirs)
}

/// `Var(xᵀAx) ≤ C · ψ̂² · E‖2Ax‖²` with both sides on the same draws.
pub fn poincare_check(
    spec: &DistributionSpec,
    a: &Mat,
    samples: usize,
    cheeger: f64,
    constant: f64,
    seed: u64,
) -> Result<MetricReport> {
    check_tensor_args(spec, &[a])?;
    let tr = a.trace();
    let n = spec.dim();
    let sums = single_batches(spec, samples, seed, 3, |x, acc| {
        let mut ax = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a[(i, j)] * x[j];
            }
            ax[i] = s;
        }
        let v = dot(x, &ax) - tr;
        acc[0] += v;
        acc[1] += v * v;
        acc[2] += 4.0 * dot(&ax, &ax);
    })?;
    let lhs = variance_from_moments(&sums, 0, 1).value;
    let rhs = constant * cheeger * cheeger * sums.mean(2);
    Ok(MetricReport::new("poincare", lhs, rhs, 0.0))
}
