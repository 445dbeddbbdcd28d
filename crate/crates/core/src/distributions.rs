//! Isotropic log-concave families with exact samplers.
//!
//! Every family is pre-scaled so that its law has zero mean and identity
//! covariance; the constants are analytic and never estimated.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Rows drawn from one RNG stream when materialising a [`SampleMatrix`].
pub const ROWS_PER_STREAM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    /// Uniform on the cube `[-√3, √3]^n`.
    Cube,
    /// Uniform on the ball of radius `√(n+2)`.
    Ball,
    /// Product of unit-variance Laplace coordinates.
    LaplaceProd,
    /// Product of `Exp(1) - 1` coordinates.
    ShiftedExpProd,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Gaussian,
        Family::Cube,
        Family::Ball,
        Family::LaplaceProd,
        Family::ShiftedExpProd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Cube => "cube",
            Family::Ball => "ball",
            Family::LaplaceProd => "laplace_prod",
            Family::ShiftedExpProd => "shifted_exp_prod",
        }
    }

    /// Whether the law is invariant under `x -> -x`.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, Family::ShiftedExpProd)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|fam| fam.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// An isotropic log-concave law in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    family: Family,
    dim: usize,
    scale: f64,
}

impl DistributionSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let scale = match family {
            Family::Gaussian => 1.0,
            Family::Cube => 3f64.sqrt(),
            Family::Ball => (dim as f64 + 2.0).sqrt(),
            Family::LaplaceProd => std::f64::consts::FRAC_1_SQRT_2,
            // Exp(1) rate; the mean shift is always -1.
            Family::ShiftedExpProd => 1.0,
        };
        Ok(Self { family, dim, scale })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Family-specific isotropization constant: cube half-width, ball radius,
    /// Laplace scale, exponential rate (1 for the Gaussian).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Stable identifier used in CSV output, e.g. `cube/16`.
    pub fn id(&self) -> String {
        format!("{}/{}", self.family, self.dim)
    }

    /// Draw one point into `out` (length `dim`).
    pub fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match self.family {
            Family::Gaussian => {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            }
            Family::Cube => {
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = (2.0 * u - 1.0) * self.scale;
                }
            }
            Family::Ball => {
                let mut norm_sq = 0.0;
                for v in out.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    norm_sq += g * g;
                    *v = g;
                }
                // Radius fraction has CDF s^n on [0, 1]; invert it.
                let u: f64 = rng.random();
                let radius = self.scale * u.powf(1.0 / self.dim as f64);
                let k = radius / norm_sq.sqrt();
                for v in out.iter_mut() {
                    *v *= k;
                }
            }
            Family::LaplaceProd => {
                for v in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *v = sign * self.scale * e;
                }
            }
            Family::ShiftedExpProd => {
                for v in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *v = e / self.scale - 1.0;
                }
            }
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.draw_into(rng, &mut out);
        out
    }

    /// Unnormalized log-density; `-inf` outside the support.
    pub fn log_density(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        let value = match self.family {
            Family::Gaussian => -0.5 * point.iter().map(|x| x * x).sum::<f64>(),
            Family::Cube => {
                if point.iter().all(|x| x.abs() <= self.scale) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Ball => {
                let r2: f64 = point.iter().map(|x| x * x).sum();
                if r2 <= self.scale * self.scale {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::LaplaceProd => -point.iter().map(|x| x.abs()).sum::<f64>() / self.scale,
            Family::ShiftedExpProd => {
                if point.iter().all(|&x| x >= -1.0) {
                    -self.scale * point.iter().map(|x| x + 1.0).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
        Ok(value)
    }
}

/// Construct a spec from a lowercase family name.
pub fn make_distribution(family: &str, n: usize) -> Result<DistributionSpec> {
    DistributionSpec::new(family.parse()?, n)
}

/// `rows × cols` block of i.i.d. draws, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    spec: DistributionSpec,
    seed: u64,
}

impl SampleMatrix {
    /// Wrap externally supplied row-major data; `seed` is recorded as given.
    pub fn from_rows(spec: &DistributionSpec, data: Vec<f64>, seed: u64) -> Result<Self> {
        let cols = spec.dim();
        if data.is_empty() {
            return Err(Error::EmptySample);
        }
        if !data.len().is_multiple_of(cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: data.len() % cols,
            });
        }
        Ok(SampleMatrix {
            rows: data.len() / cols,
            cols,
            data,
            spec: *spec,
            seed,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for row in self.iter_rows() {
            for (acc, x) in m.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let inv = 1.0 / self.rows as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    }

    /// Covariance about the column means (divisor `rows`).
    pub fn covariance(&self) -> nalgebra::DMatrix<f64> {
        let n = self.cols;
        let mean = self.mean();
        let mut cov = nalgebra::DMatrix::zeros(n, n);
        let mut centred = vec![0.0; n];
        for row in self.iter_rows() {
            for k in 0..n {
                centred[k] = row[k] - mean[k];
            }
            for i in 0..n {
                for j in i..n {
                    cov[(i, j)] += centred[i] * centred[j];
                }
            }
        }
        let inv = 1.0 / self.rows as f64;
        for i in 0..n {
            for j in i..n {
                let v = cov[(i, j)] * inv;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }
}

/// Draw `count` i.i.d. rows. Row block `k` (of [`ROWS_PER_STREAM`] rows) comes
/// from stream `k` of `seed`, so the result does not depend on thread count.
pub fn sample(spec: &DistributionSpec, count: usize, seed: u64) -> Result<SampleMatrix> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let n = spec.dim;
    let mut data = vec![0.0; count * n];
    data.par_chunks_mut(ROWS_PER_STREAM * n)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = rng::stream(seed, block as u64);
            for row in chunk.chunks_exact_mut(n) {
                spec.draw_into(&mut rng, row);
            }
        });
    Ok(SampleMatrix {
        data,
        rows: count,
        cols: n,
        spec: *spec,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for fam in Family::ALL {
            assert_eq!(fam.name().parse::<Family>().unwrap(), fam);
        }
        assert!(matches!(
            "torus".parse::<Family>(),
            Err(Error::UnknownFamily(_))
        ));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert_eq!(make_distribution("gaussian", 0), Err(Error::ZeroDimension));
    }

    #[test]
    fn isotropization_constants() {
        let cube = make_distribution("cube", 1).unwrap();
        assert_eq!(cube.scale(), 3f64.sqrt());
        // R^2/(n+2) = 1 for the uniform ball
        let ball = make_distribution("ball", 2).unwrap();
        assert_eq!(ball.scale(), 2.0);
        let lap = make_distribution("laplace_prod", 3).unwrap();
        assert!((lap.scale() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_log_density_peaks_at_origin() {
        let g = make_distribution("gaussian", 3).unwrap();
        let at0 = g.log_density(&[0.0; 3]).unwrap();
        assert_eq!(at0 - g.log_density(&[1.0, 0.0, 0.0]).unwrap(), 0.5);
        for p in [[0.1, 0.0, 0.0], [0.0, -0.3, 0.2], [1.0, 1.0, 1.0]] {
            assert!(g.log_density(&p).unwrap() < at0);
        }
    }

    #[test]
    fn cube_log_density_support() {
        let c = make_distribution("cube", 2).unwrap();
        assert!(c.log_density(&[0.5, -1.7]).unwrap().is_finite());
        assert_eq!(c.log_density(&[0.5, -1.8]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn laplace_log_density_slope() {
        let l = make_distribution("laplace_prod", 2).unwrap();
        let d = l.log_density(&[0.0, 0.0]).unwrap() - l.log_density(&[1.0, 0.0]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn log_density_dimension_mismatch() {
        let l = make_distribution("ball", 2).unwrap();
        assert_eq!(
            l.log_density(&[0.0; 3]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = make_distribution("gaussian", 2).unwrap();
        let a = sample(&g, 4, 7).unwrap();
        let b = sample(&g, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data(), sample(&g, 4, 8).unwrap().data());
    }

    #[test]
    fn zero_count_rejected() {
        let g = make_distribution("gaussian", 2).unwrap();
        assert!(sample(&g, 0, 1).is_err());
    }

    #[test]
    fn cube_samples_stay_in_support() {
        let c = make_distribution("cube", 1).unwrap();
        let s = sample(&c, 100_000, 3).unwrap();
        let a = 3f64.sqrt();
        assert!(s.data().iter().all(|x| x.abs() <= a));
    }

    #[test]
    fn ball_samples_stay_in_support() {
        let b = make_distribution("ball", 5).unwrap();
        let s = sample(&b, 20_000, 3).unwrap();
        let r2 = 7.0;
        assert!(s
            .iter_rows()
            .all(|row| row.iter().map(|x| x * x).sum::<f64>() <= r2));
    }

    #[test]
    fn shifted_exponential_third_central_moment() {
        // Exp(1): third central moment 2, and the cube of a centred Exp(1)
        // has variance E(X-1)^6 - 4 = 265 - 4 = 261.
        let spec = make_distribution("shifted_exp_prod", 1).unwrap();
        let n = 1_000_000;
        let s = sample(&spec, n, 11).unwrap();
        let m3 = s.data().iter().map(|x| x * x * x).sum::<f64>() / n as f64;
        let se = (261.0 / n as f64).sqrt();
        assert!((m3 - 2.0).abs() < 3.0 * se, "m3 = {m3}, se = {se}");
    }
}
