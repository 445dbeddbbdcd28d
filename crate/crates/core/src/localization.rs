//! Stochastic localization on a weighted particle cloud, with a closed-form
//! Gaussian backend, potential tracking, and coupling experiments.
//!
//! The tilted law at time `t` with tilt `c` has density proportional to
//! `exp(cᵀx − t‖x‖²/2) p(x)`. The particle backend represents it by fixed
//! draws from `p` with weights recomputed from `(t, c)` at every step.

use std::fmt::Write as _;
use std::ops::Range;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::distributions::{sample, DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::metrics::MetricReport;
use crate::moments::dot;
use crate::rng::{self, Rng};
use crate::stats::{self, binomial_se, mean_and_se, normal_cdf, run_batches, Estimate};

pub const MIN_PARTICLES: usize = 1000;
/// Default effective-sample-size floor as a fraction of the particle count.
pub const DEFAULT_ESS_FRACTION: f64 = 0.02;
const CHUNK: usize = 4096;

/// Deterministic parallel map-reduce over fixed chunks of `0..len`.
fn chunked<T, M, C>(len: usize, map: M, combine: C, init: T) -> T
where
    T: Send,
    M: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T,
{
    let parts: Vec<T> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| map(k * CHUNK..((k + 1) * CHUNK).min(len)))
        .collect();
    parts.into_iter().fold(init, combine)
}

fn add_vec(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
    a
}

/// `{x : normalᵀx > offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub id: String,
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(id: impl Into<String>, normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("halfspace normal is zero".into()));
        }
        Ok(Halfspace {
            id: id.into(),
            normal,
            offset,
        })
    }

    /// `{x : x_k > 0}` (k zero-based), id `x<k+1>`.
    pub fn axis(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: k + 1,
            });
        }
        let mut normal = vec![0.0; n];
        normal[k] = 1.0;
        Halfspace::new(format!("x{}", k + 1), normal, 0.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dot(&self.normal, x) > self.offset
    }

    /// Measure under `N(mu, cov)`.
    pub fn gaussian_measure(&self, mu: &[f64], cov: &Mat) -> f64 {
        let shift = dot(&self.normal, mu) - self.offset;
        let v = nalgebra::DVector::from_column_slice(&self.normal);
        let s2 = (v.transpose() * cov * &v)[(0, 0)];
        if s2 <= 0.0 {
            return if shift > 0.0 { 1.0 } else { 0.0 };
        }
        normal_cdf(shift / s2.sqrt())
    }
}

/// Closed-form mean and covariance of the tilted standard Gaussian.
pub fn gaussian_oracle(n: usize, t: f64, c: &[f64]) -> Result<(Vec<f64>, Mat)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} is negative")));
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    let s = 1.0 / (1.0 + t);
    Ok((c.iter().map(|v| v * s).collect(), Mat::identity(n, n) * s))
}

/// Potential `Tr((A − I)^q)` of the Gaussian oracle: `n (t/(1+t))^q` for even `q`.
pub fn oracle_phi(n: usize, t: f64, q: u32) -> f64 {
    n as f64 * (-t / (1.0 + t)).powi(q as i32)
}

/// `Tr((A − I)^q)`.
pub fn potential(a: &Mat, q: u32) -> f64 {
    let b = a - Mat::identity(a.nrows(), a.ncols());
    linalg::int_pow(&b, q).trace()
}

/// `−q Tr((A − I)^{q−1} A²)`, the drift of the potential when the tilted
/// law has vanishing third central moments.
pub fn potential_drift(a: &Mat, q: u32) -> f64 {
    let b = a - Mat::identity(a.nrows(), a.ncols());
    -(q as f64) * linalg::trace_product(&linalg::int_pow(&b, q - 1), &(a * a))
}

#[derive(Debug, Clone)]
struct Cloud {
    n: usize,
    data: Vec<f64>,
    sq_norms: Vec<f64>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

impl Cloud {
    fn len(&self) -> usize {
        self.sq_norms.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Recompute weights, ESS, mean and covariance for `(t, c)`.
    fn reweight(&mut self, t: f64, c: &[f64]) -> (f64, Vec<f64>, Mat) {
        let n = self.n;
        let m = self.len();
        let (data, sq) = (&self.data, &self.sq_norms);
        self.log_weights
            .par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(k, chunk)| {
                for (j, lw) in chunk.iter_mut().enumerate() {
                    let i = k * CHUNK + j;
                    *lw = dot(c, &data[i * n..(i + 1) * n]) - 0.5 * t * sq[i];
                }
            });
        let lws = &self.log_weights;
        let top = chunked(
            m,
            |r| lws[r].iter().copied().fold(f64::NEG_INFINITY, f64::max),
            f64::max,
            f64::NEG_INFINITY,
        );
        self.weights
            .par_chunks_mut(CHUNK)
            .zip(lws.par_chunks(CHUNK))
            .for_each(|(w, l)| {
                for (wi, li) in w.iter_mut().zip(l) {
                    *wi = (li - top).exp();
                }
            });
        let w = &self.weights;
        let (s1, s2) = chunked(
            m,
            |r| {
                w[r].iter()
                    .fold((0.0, 0.0), |(a, b), &v| (a + v, b + v * v))
            },
            |(a, b), (c, d)| (a + c, b + d),
            (0.0, 0.0),
        );
        let ess = s1 * s1 / s2;
        let inv = 1.0 / s1;
        self.weights
            .par_chunks_mut(CHUNK)
            .for_each(|w| w.iter_mut().for_each(|v| *v *= inv));
        let w = &self.weights;
        let mu = chunked(
            m,
            |r| {
                let mut acc = vec![0.0; n];
                for i in r {
                    let x = &data[i * n..(i + 1) * n];
                    for k in 0..n {
                        acc[k] += w[i] * x[k];
                    }
                }
                acc
            },
            add_vec,
            vec![0.0; n],
        );
        // Per chunk, scale centred particles by √w and accumulate D Dᵀ with
        // a blocked product; fixed chunks keep the sum order deterministic.
        let upper = chunked(
            m,
            |r| {
                let mut d = Mat::from_column_slice(n, r.len(), &data[r.start * n..r.end * n]);
                for (col, i) in d.as_mut_slice().chunks_exact_mut(n).zip(r) {
                    let s = w[i].sqrt();
                    for (v, m) in col.iter_mut().zip(&mu) {
                        *v = (*v - m) * s;
                    }
                }
                let mut acc = Mat::zeros(n, n);
                acc.gemm(1.0, &d, &d.transpose(), 0.0);
                acc.as_slice().to_vec()
            },
            add_vec,
            vec![0.0; n * n],
        );
        let cov = Mat::from_fn(n, n, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            upper[a * n + b]
        });
        (ess, mu, cov)
    }

    /// `Δ_k = Σ w (x−μ)(x−μ)ᵀ (x−μ)_k` for every coordinate `k`.
    fn third_moment_matrices(&self, mu: &[f64]) -> Vec<Mat> {
        let n = self.n;
        let (data, w) = (&self.data, &self.weights);
        let flat = chunked(
            self.len(),
            |r| {
                let mut acc = vec![0.0; n * n * n];
                let mut d = vec![0.0; n];
                for i in r {
                    let x = &data[i * n..(i + 1) * n];
                    for k in 0..n {
                        d[k] = x[k] - mu[k];
                    }
                    for k in 0..n {
                        let wk = w[i] * d[k];
                        for a in 0..n {
                            let wka = wk * d[a];
                            for b in a..n {
                                acc[(k * n + a) * n + b] += wka * d[b];
                            }
                        }
                    }
                }
                acc
            },
            add_vec,
            vec![0.0; n * n * n],
        );
        (0..n)
            .map(|k| {
                Mat::from_fn(n, n, |i, j| {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    flat[(k * n + a) * n + b]
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Particles(Cloud),
    Gaussian,
}

/// Where the tilted law's moments come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Weighted cloud of this many particles.
    Particles(usize),
    /// Closed form for a standard Gaussian `p`.
    GaussianExact,
}

/// The localization process at one instant.
#[derive(Debug, Clone)]
pub struct LocalizationState {
    t: f64,
    c: Vec<f64>,
    mu: Vec<f64>,
    cov: Mat,
    ess: f64,
    ess_floor: f64,
    engine: Engine,
}

impl LocalizationState {
    /// Cloud of `particles` draws from `spec` at `t = 0`, `c = 0`.
    pub fn init_cloud(spec: &DistributionSpec, particles: usize, seed: u64) -> Result<Self> {
        if particles < MIN_PARTICLES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_PARTICLES} particles, got {particles}"
            )));
        }
        let n = spec.dim();
        let data = sample(spec, particles, seed)?.into_data();
        let sq_norms = data.chunks_exact(n).map(|x| dot(x, x)).collect();
        let mut cloud = Cloud {
            n,
            data,
            sq_norms,
            log_weights: vec![0.0; particles],
            weights: vec![0.0; particles],
        };
        let c = vec![0.0; n];
        let (ess, mu, cov) = cloud.reweight(0.0, &c);
        Ok(LocalizationState {
            t: 0.0,
            c,
            mu,
            cov,
            ess,
            ess_floor: DEFAULT_ESS_FRACTION * particles as f64,
            engine: Engine::Particles(cloud),
        })
    }

    /// Closed-form state for the standard Gaussian in dimension `n`.
    pub fn gaussian(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(LocalizationState {
            t: 0.0,
            c: vec![0.0; n],
            mu: vec![0.0; n],
            cov: Mat::identity(n, n),
            ess: f64::INFINITY,
            ess_floor: 0.0,
            engine: Engine::Gaussian,
        })
    }

    pub fn for_backend(spec: &DistributionSpec, backend: Backend, seed: u64) -> Result<Self> {
        match backend {
            Backend::Particles(m) => LocalizationState::init_cloud(spec, m, seed),
            Backend::GaussianExact => {
                if spec.family() != Family::Gaussian {
                    return Err(Error::InvalidArgument(format!(
                        "closed-form backend needs a gaussian spec, got {}",
                        spec.family()
                    )));
                }
                LocalizationState::gaussian(spec.dim())
            }
        }
    }

    /// Set the ESS floor as a fraction of the particle count.
    pub fn with_ess_fraction(mut self, fraction: f64) -> Self {
        self.set_ess_fraction(fraction);
        self
    }

    pub fn set_ess_fraction(&mut self, fraction: f64) {
        if let Some(m) = self.particles() {
            self.ess_floor = fraction * m as f64;
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn cov(&self) -> &Mat {
        &self.cov
    }

    /// Effective sample size; infinite for the closed-form backend.
    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn ess_floor(&self) -> f64 {
        self.ess_floor
    }

    pub fn particles(&self) -> Option<usize> {
        match &self.engine {
            Engine::Particles(c) => Some(c.len()),
            Engine::Gaussian => None,
        }
    }

    pub fn log_weights(&self) -> Option<&[f64]> {
        match &self.engine {
            Engine::Particles(c) => Some(&c.log_weights),
            Engine::Gaussian => None,
        }
    }

    /// Normalized particle weights.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.engine {
            Engine::Particles(c) => Some(&c.weights),
            Engine::Gaussian => None,
        }
    }

    pub fn particle(&self, i: usize) -> Option<&[f64]> {
        match &self.engine {
            Engine::Particles(c) if i < c.len() => Some(c.row(i)),
            _ => None,
        }
    }

    /// Move to `(t, c)` directly and recompute the cached moments.
    pub fn set_tilt(&mut self, t: f64, c: &[f64]) -> Result<()> {
        if c.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: c.len(),
            });
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time {t} is negative")));
        }
        self.t = t;
        self.c.copy_from_slice(c);
        match &mut self.engine {
            Engine::Particles(cloud) => {
                let (ess, mu, cov) = cloud.reweight(t, c);
                self.ess = ess;
                self.mu = mu;
                self.cov = cov;
            }
            Engine::Gaussian => {
                let (mu, cov) = gaussian_oracle(self.dim(), t, c)?;
                self.mu = mu;
                self.cov = cov;
            }
        }
        if self.ess < self.ess_floor {
            return Err(Error::Degenerate {
                t,
                ess: self.ess,
                floor: self.ess_floor,
            });
        }
        Ok(())
    }

    /// One Euler–Maruyama step `c ← c + dw + μ dt` with a given Brownian
    /// increment.
    pub fn step_with_increment(&mut self, dt: f64, dw: &[f64]) -> Result<()> {
        if !(dt >= 0.0) {
            return Err(Error::InvalidArgument(format!("step {dt} is negative")));
        }
        if dw.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: dw.len(),
            });
        }
        if dt == 0.0 {
            return Ok(());
        }
        let c: Vec<f64> = self
            .c
            .iter()
            .zip(dw)
            .zip(&self.mu)
            .map(|((c, w), m)| c + w + m * dt)
            .collect();
        self.set_tilt(self.t + dt, &c)
    }

    /// One step with a fresh `N(0, dt·I)` increment.
    pub fn step(&mut self, dt: f64, rng: &mut Rng) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let s = dt.max(0.0).sqrt();
        let dw: Vec<f64> = (0..self.dim())
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            })
            .collect();
        self.step_with_increment(dt, &dw)
    }

    /// Mass of a halfspace under the current tilted law.
    pub fn measure(&self, h: &Halfspace) -> f64 {
        match &self.engine {
            Engine::Particles(cloud) => {
                let w = &cloud.weights;
                chunked(
                    cloud.len(),
                    |r| {
                        r.filter(|&i| h.contains(cloud.row(i)))
                            .map(|i| w[i])
                            .sum::<f64>()
                    },
                    |a, b| a + b,
                    0.0,
                )
            }
            Engine::Gaussian => h.gaussian_measure(&self.mu, &self.cov),
        }
    }

    /// Third central moment matrices of the tilted law (zero for Gaussians).
    pub fn third_moment_matrices(&self) -> Vec<Mat> {
        match &self.engine {
            Engine::Particles(cloud) => cloud.third_moment_matrices(&self.mu),
            Engine::Gaussian => vec![Mat::zeros(self.dim(), self.dim()); self.dim()],
        }
    }

    /// Deviation from the Gaussian oracle at the current `(t, c)`:
    /// `(‖A − I/(1+t)‖_op, ‖μ − c/(1+t)‖)`.
    pub fn oracle_deviation(&self) -> (f64, f64) {
        let (mu, cov) = gaussian_oracle(self.dim(), self.t, &self.c).expect("valid state");
        let a_dev = linalg::op_norm(&(&self.cov - cov));
        let mu_dev = self
            .mu
            .iter()
            .zip(&mu)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        (a_dev, mu_dev)
    }
}

/// Drift and martingale parts of `dΦ` at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// Full Itô drift including the third-moment terms.
    pub drift: f64,
    /// Norm of the martingale coefficient vector.
    pub martingale_norm: f64,
    /// Martingale increment over the following step.
    pub martingale_increment: f64,
}

/// Itô drift and martingale coefficients of `Φ = Tr((A−I)^q)` for the state.
pub fn potential_decomposition(state: &LocalizationState, q: u32) -> (f64, Vec<f64>) {
    let a = state.cov();
    let n = a.nrows();
    let b = a - Mat::identity(n, n);
    let powers: Vec<Mat> = (0..q).map(|k| linalg::int_pow(&b, k)).collect();
    let deltas = state.third_moment_matrices();
    let qf = q as f64;
    let mut drift = potential_drift(a, q);
    if q >= 2 {
        let mut second = 0.0;
        for d in &deltas {
            for lo in 0..=(q - 2) as usize {
                let hi = q as usize - 2 - lo;
                second += (&powers[lo] * d * &powers[hi] * d).trace();
            }
        }
        drift += 0.5 * qf * second;
    }
    let top = &powers[q as usize - 1];
    let coef = deltas
        .iter()
        .map(|d| qf * linalg::trace_product(top, d))
        .collect();
    (drift, coef)
}

/// One recorded instant of a localization run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub mu_norm: f64,
    pub a_op: f64,
    pub tr_a2: f64,
    pub phi: f64,
    pub ess: f64,
    /// Halfspace masses, in the trace's set order.
    pub g: Vec<f64>,
    /// `−q Tr((A−I)^{q−1}A²)` at this instant.
    pub drift_main: f64,
    /// `‖A − I/(1+t)‖_op` against the Gaussian oracle at this `(t, c)`.
    pub oracle_a_dev: f64,
    /// `‖μ − c/(1+t)‖`.
    pub oracle_mu_dev: f64,
    pub decomposition: Option<Decomposition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationTrace {
    pub q: u32,
    pub dt: f64,
    pub set_ids: Vec<String>,
    pub rows: Vec<TraceRow>,
    /// Set when the run stopped early on a degenerate cloud.
    pub halted: Option<Error>,
}

impl LocalizationTrace {
    pub fn csv_header(&self) -> String {
        let mut h = String::from("t,mu_norm,a_op,tr_a2,phi_q,ess");
        for id in &self.set_ids {
            h.push_str(",g_");
            h.push_str(id);
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                r.t, r.mu_norm, r.a_op, r.tr_a2, r.phi, r.ess
            );
            for g in &r.g {
                let _ = write!(out, ",{g:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace has an initial row")
    }

    /// Row closest to time `t`, if one lies within half a step.
    pub fn row_at(&self, t: f64) -> Option<&TraceRow> {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .filter(|r| (r.t - t).abs() <= 0.5 * self.dt + 1e-12)
    }

    pub fn max_oracle_a_dev(&self) -> f64 {
        self.rows.iter().map(|r| r.oracle_a_dev).fold(0.0, f64::max)
    }

    pub fn max_oracle_mu_dev(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.oracle_mu_dev)
            .fold(0.0, f64::max)
    }

    pub fn max_a_op(&self) -> f64 {
        self.rows.iter().map(|r| r.a_op).fold(0.0, f64::max)
    }

    /// `max t·‖A_t‖_op` over rows with `t ≥ t_min`.
    pub fn max_t_a_op(&self, t_min: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.t >= t_min)
            .map(|r| r.t * r.a_op)
            .reduce(f64::max)
    }

    pub fn is_time_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].t > w[0].t)
    }
}

/// Brownian increments generated on a fine grid and summed in groups, so
/// runs with different steps can share one path.
pub struct BrownianSource {
    rng: Rng,
    n: usize,
    sub_sd: f64,
    refinement: u32,
}

impl BrownianSource {
    /// Increments of length `refinement · sub_dt`.
    pub fn new(seed: u64, n: usize, sub_dt: f64, refinement: u32) -> Self {
        BrownianSource {
            rng: rng::stream(rng::derive_seed(seed, "brownian", 0), 0),
            n,
            sub_sd: sub_dt.sqrt(),
            refinement: refinement.max(1),
        }
    }

    pub fn next_increment(&mut self) -> Vec<f64> {
        let mut dw = vec![0.0; self.n];
        for _ in 0..self.refinement {
            for v in dw.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                *v += self.sub_sd * z;
            }
        }
        dw
    }
}

/// Settings for one localization run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Even exponent of the potential.
    pub q: u32,
    pub backend: Backend,
    pub ess_fraction: f64,
    /// Brownian increments are summed from this many sub-steps.
    pub refinement: u32,
    /// Record the Itô decomposition of `Φ` (costs `M n³` per step).
    pub decompose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 1.0,
            dt: 1e-3,
            q: 2,
            backend: Backend::Particles(100_000),
            ess_fraction: DEFAULT_ESS_FRACTION,
            refinement: 1,
            decompose: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon {} invalid",
                self.horizon
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step {} must be positive",
                self.dt
            )));
        }
        if self.q < 2 || !self.q.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "q = {} must be even and >= 2",
                self.q
            )));
        }
        if !(0.0..1.0).contains(&self.ess_fraction) {
            return Err(Error::InvalidArgument(format!(
                "ess fraction {} outside [0, 1)",
                self.ess_fraction
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

fn record(
    state: &LocalizationState,
    q: u32,
    sets: &[Halfspace],
    decomposition: Option<Decomposition>,
) -> TraceRow {
    let a = state.cov();
    let (oracle_a_dev, oracle_mu_dev) = state.oracle_deviation();
    TraceRow {
        t: state.t(),
        mu_norm: dot(state.mu(), state.mu()).sqrt(),
        a_op: linalg::op_norm(a),
        tr_a2: linalg::trace_product(a, a),
        phi: potential(a, q),
        ess: state.ess(),
        g: sets.iter().map(|h| state.measure(h)).collect(),
        drift_main: potential_drift(a, q),
        oracle_a_dev,
        oracle_mu_dev,
        decomposition,
    }
}

fn check_sets(n: usize, sets: &[Halfspace]) -> Result<()> {
    for h in sets {
        if h.normal.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h.normal.len(),
            });
        }
    }
    Ok(())
}

/// Simulate one run and record every step. A degenerate cloud ends the run
/// early; the partial trace is returned with `halted` set.
pub fn run_trace(
    spec: &DistributionSpec,
    cfg: &RunConfig,
    sets: &[Halfspace],
    seed: u64,
) -> Result<LocalizationTrace> {
    cfg.validate()?;
    check_sets(spec.dim(), sets)?;
    let state =
        LocalizationState::for_backend(spec, cfg.backend, rng::derive_seed(seed, "cloud", 0))?
            .with_ess_fraction(cfg.ess_fraction);
    let bm = BrownianSource::new(
        seed,
        spec.dim(),
        cfg.dt / cfg.refinement.max(1) as f64,
        cfg.refinement,
    );
    run_from_state(state, cfg, sets, bm)
}

/// [`run_trace`] from a prepared state and Brownian source.
pub fn run_from_state(
    mut state: LocalizationState,
    cfg: &RunConfig,
    sets: &[Halfspace],
    mut bm: BrownianSource,
) -> Result<LocalizationTrace> {
    cfg.validate()?;
    check_sets(state.dim(), sets)?;
    let mut trace = LocalizationTrace {
        q: cfg.q,
        dt: cfg.dt,
        set_ids: sets.iter().map(|h| h.id.clone()).collect(),
        rows: Vec::with_capacity(cfg.steps() + 1),
        halted: None,
    };
    for _ in 0..cfg.steps() {
        let dw = bm.next_increment();
        let decomposition = cfg.decompose.then(|| {
            let (drift, coef) = potential_decomposition(&state, cfg.q);
            Decomposition {
                drift,
                martingale_norm: dot(&coef, &coef).sqrt(),
                martingale_increment: dot(&coef, &dw),
            }
        });
        trace.rows.push(record(&state, cfg.q, sets, decomposition));
        match state.step_with_increment(cfg.dt, &dw) {
            Ok(()) => {}
            Err(e @ Error::Degenerate { .. }) => {
                trace.halted = Some(e);
                return Ok(trace);
            }
            Err(e) => return Err(e),
        }
    }
    let decomposition = cfg.decompose.then(|| {
        let (drift, coef) = potential_decomposition(&state, cfg.q);
        Decomposition {
            drift,
            martingale_norm: dot(&coef, &coef).sqrt(),
            martingale_increment: 0.0,
        }
    });
    trace.rows.push(record(&state, cfg.q, sets, decomposition));
    Ok(trace)
}

/// Independent runs in parallel; run `r` uses seed `derive_seed(seed, "run", r)`.
pub fn run_many(
    spec: &DistributionSpec,
    cfg: &RunConfig,
    sets: &[Halfspace],
    runs: usize,
    seed: u64,
) -> Result<Vec<LocalizationTrace>> {
    (0..runs)
        .into_par_iter()
        .map(|r| run_trace(spec, cfg, sets, rng::derive_seed(seed, "run", r as u64)))
        .collect()
}

/// Finite-difference `dΦ/dt` against the analytic drift `−q Tr((A−I)^{q−1}A²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftCheck {
    pub q: u32,
    pub points: usize,
    pub max_relative_error: f64,
    pub worst_t: f64,
}

impl DriftCheck {
    pub fn to_metric_report(&self, tolerance: f64) -> MetricReport {
        MetricReport::new(
            format!("phi_drift_q{}", self.q),
            self.max_relative_error,
            tolerance,
            0.0,
        )
    }
}

/// Central differences of `Φ` over `±half_window` (in steps) compared with
/// the window average of the analytic drift, at every row with `t ≥ t_min`
/// whose window fits in the trace.
pub fn phi_drift_check(
    trace: &LocalizationTrace,
    half_window: usize,
    t_min: f64,
) -> Result<DriftCheck> {
    let w = half_window.max(1);
    let rows = &trace.rows;
    let mut points = 0;
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    for k in w..rows.len().saturating_sub(w) {
        if rows[k].t < t_min {
            continue;
        }
        let span = rows[k + w].t - rows[k - w].t;
        let fd = (rows[k + w].phi - rows[k - w].phi) / span;
        // Trapezoid average of the drift over the window.
        let seg = &rows[k - w..=k + w];
        let mut avg = 0.0;
        for pair in seg.windows(2) {
            avg += 0.5 * (pair[0].drift_main + pair[1].drift_main) * (pair[1].t - pair[0].t);
        }
        avg /= span;
        let rel = (fd - avg).abs() / avg.abs().max(f64::MIN_POSITIVE);
        points += 1;
        if rel > worst.0 {
            worst = (rel, rows[k].t);
        }
    }
    if points == 0 {
        return Err(Error::InvalidArgument(
            "no rows inside the drift window".into(),
        ));
    }
    Ok(DriftCheck {
        q: trace.q,
        points,
        max_relative_error: worst.0,
        worst_t: worst.1,
    })
}

/// Audit of the potential-bound implication on a decomposed trace: with
/// constant bounds `f = max drift⁺`, `g = max ‖v‖`, the conditions are
/// `Φ₀ ≤ U/2`, `f·T ≤ U/8`, `g·√T ≤ U/8`; if they hold and the recorded
/// martingale part stays below `U/3`, the path must stay below `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialAudit {
    pub u: f64,
    pub horizon: f64,
    pub phi0: f64,
    pub drift_bound: f64,
    pub martingale_bound: f64,
    pub conditions_met: bool,
    /// `max_t (Φ_t − Φ₀ − ∫δ)`.
    pub max_martingale: f64,
    pub max_phi: f64,
    pub implication_holds: bool,
    /// `max_t |(Φ_t − Φ₀ − ∫δ) − Σ v·ΔW|`: discretization residual.
    pub ito_residual: f64,
}

pub fn potential_audit(trace: &LocalizationTrace, u: f64) -> Result<PotentialAudit> {
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bound U = {u} must be positive"
        )));
    }
    let rows = &trace.rows;
    let decs: Vec<Decomposition> = rows
        .iter()
        .map(|r| r.decomposition)
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidArgument("trace has no decomposition".into()))?;
    let phi0 = rows[0].phi;
    let horizon = rows.last().map_or(0.0, |r| r.t) - rows[0].t;
    let drift_bound = decs.iter().map(|d| d.drift.max(0.0)).fold(0.0, f64::max);
    let martingale_bound = decs.iter().map(|d| d.martingale_norm).fold(0.0, f64::max);
    let conditions_met = phi0 <= u / 2.0
        && drift_bound * horizon <= u / 8.0
        && martingale_bound * horizon.sqrt() <= u / 8.0;
    let (mut integral, mut ito) = (0.0, 0.0);
    let (mut max_martingale, mut residual) = (0.0f64, 0.0f64);
    for k in 1..rows.len() {
        let h = rows[k].t - rows[k - 1].t;
        integral += decs[k - 1].drift * h;
        ito += decs[k - 1].martingale_increment;
        let y = rows[k].phi - phi0 - integral;
        max_martingale = max_martingale.max(y);
        residual = residual.max((y - ito).abs());
    }
    let max_phi = rows.iter().map(|r| r.phi).fold(f64::NEG_INFINITY, f64::max);
    let premise = conditions_met && max_martingale <= u / 3.0;
    Ok(PotentialAudit {
        u,
        horizon,
        phi0,
        drift_bound,
        martingale_bound,
        conditions_met,
        max_martingale,
        max_phi,
        implication_holds: !premise || max_phi <= u,
        ito_residual: residual,
    })
}

/// Summary of halfspace masses over many runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub runs: usize,
    pub degenerate_runs: usize,
    pub g0: Estimate,
    pub g_final: Estimate,
    /// Mean over runs of `g_T − g_0`.
    pub gap: Estimate,
    /// Fraction of runs with `1/4 ≤ g_T ≤ 3/4`.
    pub band_frequency: f64,
    pub band_se: f64,
    /// Fraction of runs with `∫₀ᵀ ‖A_s‖_op ds ≥ 1/64`.
    pub integral_exceed_frequency: f64,
    /// `0.9 − integral_exceed_frequency − 3·SE`.
    pub band_lower_bound: f64,
}

impl MartingaleReport {
    /// Mean of `g_T` against the mean of `g_0`, within 3 SE of the gap.
    pub fn mean_report(&self) -> MetricReport {
        MetricReport::new(
            "martingale_mean",
            self.gap.value.abs(),
            3.0 * self.gap.std_error,
            0.0,
        )
    }

    /// Band frequency against the bound `0.9 − P(∫‖A‖ ≥ 1/64) − 3 SE`.
    pub fn band_report(&self) -> MetricReport {
        MetricReport::new(
            "martingale_band",
            self.band_lower_bound,
            self.band_frequency,
            0.0,
        )
    }
}

/// Runs `runs` localizations and records `g_0`, `g_T` for one halfspace.
pub fn martingale_check(
    spec: &DistributionSpec,
    halfspace: &Halfspace,
    cfg: &RunConfig,
    runs: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if runs < 2 {
        return Err(Error::InvalidArgument("need at least 2 runs".into()));
    }
    let traces = run_many(spec, cfg, std::slice::from_ref(halfspace), runs, seed)?;
    martingale_from_traces(&traces, seed)
}

/// Martingale summary of already computed traces (first tracked set).
pub fn martingale_from_traces(traces: &[LocalizationTrace], seed: u64) -> Result<MartingaleReport> {
    let runs = traces.len();
    if runs < 2 {
        return Err(Error::InvalidArgument("need at least 2 runs".into()));
    }
    if traces.iter().any(|t| t.set_ids.is_empty()) {
        return Err(Error::InvalidArgument("traces track no halfspace".into()));
    }
    let degenerate_runs = traces.iter().filter(|t| t.halted.is_some()).count();
    let g0: Vec<f64> = traces.iter().map(|t| t.rows[0].g[0]).collect();
    let gt: Vec<f64> = traces.iter().map(|t| t.final_row().g[0]).collect();
    let gap: Vec<f64> = gt.iter().zip(&g0).map(|(a, b)| a - b).collect();
    let estimate = |v: &[f64]| {
        let (value, se) = mean_and_se(v);
        Estimate {
            value,
            std_error: se,
            n_samples: v.len(),
            seed,
        }
    };
    let in_band = gt.iter().filter(|&&g| (0.25..=0.75).contains(&g)).count();
    let band_frequency = in_band as f64 / runs as f64;
    let exceed = traces
        .iter()
        .filter(|t| {
            let mut integral = 0.0;
            for w in t.rows.windows(2) {
                integral += 0.5 * (w[0].a_op + w[1].a_op) * (w[1].t - w[0].t);
            }
            integral >= 1.0 / 64.0
        })
        .count();
    let integral_exceed_frequency = exceed as f64 / runs as f64;
    let combined_se =
        binomial_se(band_frequency, runs).hypot(binomial_se(integral_exceed_frequency, runs));
    Ok(MartingaleReport {
        runs,
        degenerate_runs,
        g0: estimate(&g0),
        g_final: estimate(&gt),
        gap: estimate(&gap),
        band_frequency,
        band_se: binomial_se(band_frequency, runs),
        integral_exceed_frequency,
        band_lower_bound: 0.9 - integral_exceed_frequency - 3.0 * combined_se,
    })
}

/// One coupled run: integrals of `√(yᵀA²y)` and `√(Tr A²)` against a shared
/// scalar Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledRun {
    /// Difference of the two stochastic integrals up to the final time.
    pub difference: f64,
    /// Extrapolated second moment of the difference beyond the final time,
    /// assuming both integrands decay like `1/t`.
    pub tail: f64,
    pub final_t: f64,
    pub degenerate: bool,
}

/// Coupled integrals for a given `y`. The scalar motion is
/// `dB = (A y)ᵀ dW / ‖A y‖`, so the first integral reproduces `⟨x, y⟩`
/// for the localized point `x`.
pub fn coupled_run(
    p: &DistributionSpec,
    y: &[f64],
    horizon: f64,
    dt: f64,
    backend: Backend,
    seed: u64,
) -> Result<CoupledRun> {
    let n = p.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let cfg = RunConfig {
        horizon,
        dt,
        backend,
        ..RunConfig::default()
    };
    cfg.validate()?;
    let mut state = LocalizationState::for_backend(p, backend, rng::derive_seed(seed, "cloud", 0))?;
    let mut bm = BrownianSource::new(seed, n, dt, 1);
    let integrands = |s: &LocalizationState| {
        let a = s.cov();
        let ay = a * nalgebra::DVector::from_column_slice(y);
        let tr = linalg::trace_product(a, a).max(0.0).sqrt();
        (ay, tr)
    };
    let mut difference = 0.0;
    let mut degenerate = false;
    for _ in 0..cfg.steps() {
        let dw = bm.next_increment();
        let (ay, tr) = integrands(&state);
        let norm = ay.norm();
        let db = if norm > 0.0 {
            dot(ay.as_slice(), &dw) / norm
        } else {
            dw[0]
        };
        difference += (norm - tr) * db;
        match state.step_with_increment(dt, &dw) {
            Ok(()) => {}
            Err(Error::Degenerate { .. }) => {
                degenerate = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let (ay, tr) = integrands(&state);
    let final_t = state.t();
    Ok(CoupledRun {
        difference,
        tail: (ay.norm() - tr).powi(2) * final_t,
        final_t,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledCltReport {
    /// Second moment of the difference including the extrapolated tail.
    pub squared: Estimate,
    /// Second moment of the difference up to the horizon only.
    pub truncated: Estimate,
    /// Mean extrapolated tail contribution.
    pub tail: Estimate,
    /// `√squared`: a W₂ upper-bound sample.
    pub rms: f64,
    pub runs: usize,
    pub degenerate_runs: usize,
}

/// Coupling of `⟨x, y⟩` with a Gaussian integral: per run draw `y ~ q`,
/// localize `p`, and integrate both integrands against one Brownian path.
#[allow(clippy::too_many_arguments)]
pub fn coupled_clt_distance(
    p: &DistributionSpec,
    q: &DistributionSpec,
    horizon: f64,
    dt: f64,
    runs: usize,
    backend: Backend,
    seed: u64,
) -> Result<CoupledCltReport> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if runs < 2 {
        return Err(Error::InvalidArgument("need at least 2 runs".into()));
    }
    let results = (0..runs)
        .into_par_iter()
        .map(|r| {
            let run_seed = rng::derive_seed(seed, "clt-run", r as u64);
            let mut rng = rng::stream(rng::derive_seed(run_seed, "y", 0), 0);
            let y = q.draw(&mut rng);
            coupled_run(p, &y, horizon, dt, backend, run_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let degenerate_runs = results.iter().filter(|r| r.degenerate).count();
    let estimate = |v: Vec<f64>| {
        let (value, se) = mean_and_se(&v);
        Estimate {
            value,
            std_error: se,
            n_samples: v.len(),
            seed,
        }
    };
    let truncated = estimate(results.iter().map(|r| r.difference.powi(2)).collect());
    let tail = estimate(results.iter().map(|r| r.tail).collect());
    let squared = estimate(
        results
            .iter()
            .map(|r| r.difference.powi(2) + r.tail)
            .collect(),
    );
    Ok(CoupledCltReport {
        rms: squared.value.max(0.0).sqrt(),
        squared,
        truncated,
        tail,
        runs,
        degenerate_runs,
    })
}

/// Reflection principle `P(sup_{s≤t} W_s ≥ a) = 2 P(W_t ≥ a)` on shared paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionReport {
    pub sup_probability: Estimate,
    pub twice_tail: Estimate,
    /// `sup_probability − twice_tail`.
    pub difference: Estimate,
}

impl ReflectionReport {
    pub fn to_metric_report(&self) -> MetricReport {
        MetricReport::new(
            "reflection",
            self.difference.value.abs(),
            3.0 * self.difference.std_error,
            0.0,
        )
    }
}

pub fn brownian_reflection_check(
    t: f64,
    a: f64,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<ReflectionReport> {
    if !(a >= 0.0) {
        return Err(Error::InvalidArgument(format!("level {a} is negative")));
    }
    if !(t > 0.0) || steps == 0 || paths < 2 {
        return Err(Error::InvalidArgument(
            "need t > 0, at least one step and two paths".into(),
        ));
    }
    let sd = (t / steps as f64).sqrt();
    let sums = run_batches(seed, paths, 2, |rng, count, acc| {
        for _ in 0..count {
            let (mut w, mut top) = (0.0f64, 0.0f64);
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(rng);
                w += sd * z;
                top = top.max(w);
            }
            if top >= a {
                acc[0] += 1.0;
            }
            if w >= a {
                acc[1] += 2.0;
            }
        }
    });
    Ok(ReflectionReport {
        sup_probability: sums.estimate(0),
        twice_tail: sums.estimate(1),
        difference: sums.estimate_linear(&[1.0, -1.0]),
    })
}

/// Exact value of `2 P(W_t ≥ a)`.
pub fn reflection_exact(t: f64, a: f64) -> f64 {
    2.0 * (1.0 - stats::normal_cdf(a / t.sqrt()))
}

/// Frequency of `max_{t≤T} ‖A_t‖_op ≥ 2` over independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct OpNormProbe {
    pub runs: usize,
    pub degenerate_runs: usize,
    pub horizon: f64,
    pub exceed_frequency: f64,
    pub std_error: f64,
    pub max_a_op: Vec<f64>,
}

pub const OP_NORM_LEVEL: f64 = 2.0;

/// Default probe horizon `0.1 / √n`.
pub fn opnorm_probe_horizon(n: usize) -> f64 {
    0.1 / (n as f64).sqrt()
}

pub fn opnorm_probe(
    spec: &DistributionSpec,
    cfg: &RunConfig,
    runs: usize,
    seed: u64,
) -> Result<OpNormProbe> {
    let traces = run_many(spec, cfg, &[], runs, seed)?;
    let max_a_op: Vec<f64> = traces.iter().map(LocalizationTrace::max_a_op).collect();
    let exceed = max_a_op.iter().filter(|&&v| v >= OP_NORM_LEVEL).count();
    let f = exceed as f64 / runs.max(1) as f64;
    Ok(OpNormProbe {
        runs,
        degenerate_runs: traces.iter().filter(|t| t.halted.is_some()).count(),
        horizon: cfg.horizon,
        exceed_frequency: f,
        std_error: binomial_se(f, runs.max(1)),
        max_a_op,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize) -> DistributionSpec {
        DistributionSpec::new(Family::Gaussian, n).unwrap()
    }

    #[test]
    fn oracle_values() {
        let (mu, cov) = gaussian_oracle(3, 0.0, &[0.0; 3]).unwrap();
        assert_eq!(mu, vec![0.0; 3]);
        assert_eq!(cov, Mat::identity(3, 3));
        let (_, cov) = gaussian_oracle(2, 1.0, &[0.0; 2]).unwrap();
        assert_eq!(cov, Mat::identity(2, 2) * 0.5);
        let t = 0.7;
        let (_, cov) = gaussian_oracle(5, t, &[0.0; 5]).unwrap();
        for q in [2, 4] {
            assert!((potential(&cov, q) - oracle_phi(5, t, q)).abs() < 1e-12);
        }
        assert!(gaussian_oracle(2, -1.0, &[0.0; 2]).is_err());
    }

    #[test]
    fn init_cloud_is_uniform() {
        let s = LocalizationState::init_cloud(&gaussian(3), 5000, 1).unwrap();
        assert_eq!(s.ess(), 5000.0);
        let sum: f64 = s.weights().unwrap().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let mu = dot(s.mu(), s.mu()).sqrt();
        assert!(mu < 3.0 * (3.0f64 / 5000.0).sqrt(), "{mu}");
        assert!(LocalizationState::init_cloud(&gaussian(3), 999, 1).is_err());
    }

    #[test]
    fn zero_step_is_identity() {
        let mut s = LocalizationState::init_cloud(&gaussian(2), 2000, 2).unwrap();
        let mut rng = rng::stream(0, 0);
        s.step(0.05, &mut rng).unwrap();
        let before = (s.t(), s.c().to_vec(), s.cov().clone());
        s.step(0.0, &mut rng).unwrap();
        assert_eq!((s.t(), s.c().to_vec(), s.cov().clone()), before);
    }

    #[test]
    fn log_weights_follow_closed_form() {
        let mut s = LocalizationState::init_cloud(&gaussian(2), 2000, 3).unwrap();
        let mut rng = rng::stream(1, 0);
        for _ in 0..20 {
            s.step(0.01, &mut rng).unwrap();
        }
        let (t, c) = (s.t(), s.c().to_vec());
        let lw = s.log_weights().unwrap();
        for i in [0, 17, 1999] {
            let x = s.particle(i).unwrap();
            let expect = dot(&c, x) - 0.5 * t * dot(x, x);
            assert!((lw[i] - expect).abs() < 1e-12);
        }
        let sum: f64 = s.weights().unwrap().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cloud_halts() {
        let cfg = RunConfig {
            horizon: 50.0,
            dt: 0.5,
            backend: Backend::Particles(1000),
            ess_fraction: 0.5,
            ..RunConfig::default()
        };
        let tr = run_trace(&gaussian(4), &cfg, &[], 5).unwrap();
        assert!(matches!(tr.halted, Some(Error::Degenerate { .. })));
        assert!(tr.rows.len() < cfg.steps() + 1);
    }

    #[test]
    fn gaussian_backend_tracks_oracle_exactly() {
        let cfg = RunConfig {
            horizon: 0.5,
            dt: 0.01,
            backend: Backend::GaussianExact,
            ..RunConfig::default()
        };
        let h = Halfspace::axis(3, 0).unwrap();
        let tr = run_trace(&gaussian(3), &cfg, &[h], 9).unwrap();
        assert_eq!(tr.rows.len(), 51);
        assert!(tr.max_oracle_a_dev() < 1e-12);
        assert_eq!(tr.rows[0].g[0], 0.5);
        assert!(tr.is_time_increasing());
        assert!(run_trace(
            &DistributionSpec::new(Family::Cube, 3).unwrap(),
            &cfg,
            &[],
            0
        )
        .is_err());
    }

    #[test]
    fn invalid_run_configs() {
        let base = RunConfig::default();
        for cfg in [
            RunConfig { q: 3, ..base },
            RunConfig { dt: 0.0, ..base },
            RunConfig {
                horizon: -1.0,
                ..base
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn fixed_norm_y_gives_zero_difference() {
        let n = 16;
        let y = vec![1.0; n];
        let r = coupled_run(&gaussian(n), &y, 2.0, 0.01, Backend::GaussianExact, 4).unwrap();
        assert!(r.difference.abs() < 1e-12 && r.tail < 1e-24, "{r:?}");
    }

    #[test]
    fn reflection_at_zero() {
        let r = brownian_reflection_check(1.0, 0.0, 2000, 50, 3).unwrap();
        assert_eq!(r.sup_probability.value, 1.0);
        assert!(r.twice_tail.within(1.0, 4.0));
        assert!(brownian_reflection_check(1.0, -0.5, 10, 10, 0).is_err());
    }

    #[test]
    fn decomposition_vanishes_for_gaussian_backend() {
        let mut s = LocalizationState::gaussian(3).unwrap();
        s.set_tilt(0.4, &[0.1, -0.2, 0.3]).unwrap();
        let (drift, coef) = potential_decomposition(&s, 4);
        assert!((drift - potential_drift(s.cov(), 4)).abs() < 1e-15);
        assert!(coef.iter().all(|&v| v == 0.0));
    }
}
