//! Matrix trace inequalities (checked exactly) and pair-tensor
//! inequalities (checked on shared Monte-Carlo pairs).

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::distributions::{sample, DistributionSpec, SampleMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::moments::{bilinear, sorted_product};
use crate::rng::{self, Rng};
use crate::stats::{BatchSums, Estimate};

/// Random matrix families used as inequality inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    /// `G Gᵀ / n` with Gaussian `G`.
    PsdWishart,
    /// `(G + Gᵀ) / 2`.
    SymmetricGoe,
    /// Diagonal with Gaussian entries.
    Diagonal,
    /// `G Gᵀ / r` with `G` of shape `n × r`.
    LowRank(usize),
    /// Orthogonal projection onto a random `r`-dimensional subspace.
    Projection(usize),
}

impl EnsembleKind {
    pub fn name(&self) -> String {
        match self {
            EnsembleKind::PsdWishart => "psd_wishart".into(),
            EnsembleKind::SymmetricGoe => "symmetric_goe".into(),
            EnsembleKind::Diagonal => "diagonal".into(),
            EnsembleKind::LowRank(r) => format!("low_rank:{r}"),
            EnsembleKind::Projection(r) => format!("projection:{r}"),
        }
    }

    pub fn is_psd(&self) -> bool {
        !matches!(self, EnsembleKind::SymmetricGoe | EnsembleKind::Diagonal)
    }

    /// The default kinds for dimension `n`.
    pub fn defaults(n: usize) -> Vec<EnsembleKind> {
        let r = (n / 2).max(1);
        vec![
            EnsembleKind::PsdWishart,
            EnsembleKind::SymmetricGoe,
            EnsembleKind::Diagonal,
            EnsembleKind::LowRank(r),
            EnsembleKind::Projection(r),
        ]
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rank) = match s.split_once(':') {
            Some((h, r)) => {
                let r = r
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad rank in ensemble {s:?}")))?;
                (h.trim(), Some(r))
            }
            None => (s.trim(), None),
        };
        match (head, rank) {
            ("psd_wishart", None) => Ok(EnsembleKind::PsdWishart),
            ("symmetric_goe", None) => Ok(EnsembleKind::SymmetricGoe),
            ("diagonal", None) => Ok(EnsembleKind::Diagonal),
            ("low_rank", Some(r)) => Ok(EnsembleKind::LowRank(r)),
            ("projection", Some(r)) => Ok(EnsembleKind::Projection(r)),
            _ => Err(Error::InvalidArgument(format!("unknown ensemble {s:?}"))),
        }
    }
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// A seeded stream of matrices of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEnsemble {
    pub kind: EnsembleKind,
    pub dim: usize,
    pub seed: u64,
}

impl MatrixEnsemble {
    pub fn new(kind: EnsembleKind, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if let EnsembleKind::LowRank(r) | EnsembleKind::Projection(r) = kind {
            if r == 0 || r > dim {
                return Err(Error::InvalidArgument(format!(
                    "rank {r} outside 1..={dim}"
                )));
            }
        }
        Ok(MatrixEnsemble { kind, dim, seed })
    }

    pub fn draw(&self, rng: &mut Rng) -> Mat {
        let n = self.dim;
        match self.kind {
            EnsembleKind::PsdWishart => {
                let g = gaussian_matrix(rng, n, n);
                linalg::symmetrize(&(&g * g.transpose() / n as f64))
            }
            EnsembleKind::SymmetricGoe => linalg::symmetrize(&gaussian_matrix(rng, n, n)),
            EnsembleKind::Diagonal => {
                let d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                Mat::from_diagonal(&nalgebra::DVector::from_vec(d))
            }
            EnsembleKind::LowRank(r) => {
                let g = gaussian_matrix(rng, n, r);
                linalg::symmetrize(&(&g * g.transpose() / r as f64))
            }
            EnsembleKind::Projection(r) => {
                let q = gaussian_matrix(rng, n, r).qr().q();
                linalg::symmetrize(&(&q * q.transpose()))
            }
        }
    }

    /// PSD draw: non-PSD kinds are mapped through `|M|`.
    pub fn draw_psd(&self, rng: &mut Rng) -> Mat {
        let m = self.draw(rng);
        if self.kind.is_psd() {
            m
        } else {
            linalg::abs(&m)
        }
    }

    /// Generator for trial `index`.
    pub fn trial_rng(&self, label: &str, index: u64) -> Rng {
        rng::stream(rng::derive_seed(self.seed, label, index), 0)
    }
}

/// Aggregated outcome of repeated inequality trials.
#[derive(Debug, Clone, PartialEq)]
pub struct IneqTrialReport {
    pub lemma_id: String,
    pub trials: usize,
    /// Strict failures (deterministic) or CI-separated failures (stochastic).
    pub violations: usize,
    /// Smallest `rhs − lhs` observed.
    pub worst_slack: f64,
    /// Stochastic trials whose point estimate crossed the bound without
    /// CI separation, or slack-only items that exceeded the configured
    /// constant beyond the CI.
    pub ci_flagged: usize,
}

impl IneqTrialReport {
    pub const CSV_HEADER: &'static str = "lemma_id,trials,violations,worst_slack,ci_flagged";

    pub fn empty(lemma_id: impl Into<String>) -> Self {
        IneqTrialReport {
            lemma_id: lemma_id.into(),
            trials: 0,
            violations: 0,
            worst_slack: f64::INFINITY,
            ci_flagged: 0,
        }
    }

    fn single(lemma_id: &str, violated: bool, slack: f64, flagged: bool) -> Self {
        IneqTrialReport {
            lemma_id: lemma_id.to_string(),
            trials: 1,
            violations: usize::from(violated),
            worst_slack: slack,
            ci_flagged: usize::from(flagged),
        }
    }

    /// Combine two reports for the same lemma.
    pub fn merge(mut self, other: &IneqTrialReport) -> Self {
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst_slack = self.worst_slack.min(other.worst_slack);
        self.ci_flagged += other.ci_flagged;
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{}",
            self.lemma_id, self.trials, self.violations, self.worst_slack, self.ci_flagged
        )
    }
}

fn merge_all(
    lemma_id: &str,
    reports: impl IntoIterator<Item = IneqTrialReport>,
) -> IneqTrialReport {
    reports
        .into_iter()
        .fold(IneqTrialReport::empty(lemma_id), |acc, r| acc.merge(&r))
}

// ---------------------------------------------------------------------------
// Deterministic matrix inequalities

/// Both sides of a deterministic inequality and the magnitude its
/// tolerance is scaled by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

pub const DETERMINISTIC_TOLERANCE: f64 = 1e-9;

impl Sides {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + DETERMINISTIC_TOLERANCE * self.scale.max(1e-300)
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn same_shape(a: &Mat, b: &Mat) -> Result<()> {
    linalg::ensure_square(a)?;
    linalg::ensure_dim(b, a.nrows())
}

/// `Tr(AB)` against `(Tr|A|^s)^{1/s} (Tr|B|^t)^{1/t}`.
pub fn holder_sides(a: &Mat, b: &Mat, s: f64, t: f64) -> Result<Sides> {
    same_shape(a, b)?;
    linalg::ensure_symmetric(a)?;
    linalg::ensure_symmetric(b)?;
    if !(s >= 1.0 && t >= 1.0) || (1.0 / s + 1.0 / t - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "exponents {s}, {t} are not conjugate"
        )));
    }
    let lhs = linalg::trace_product(a, b);
    let rhs = linalg::schatten_norm(a, s) * linalg::schatten_norm(b, t);
    Ok(Sides {
        lhs,
        rhs,
        scale: a.norm() * b.norm(),
    })
}

pub fn check_matrix_holder(a: &Mat, b: &Mat, s: f64, t: f64) -> Result<bool> {
    Ok(holder_sides(a, b, s, t)?.holds())
}

/// `Tr((B^{1/2} A B^{1/2})^r)` against `Tr(B^{r/2} A^r B^{r/2})`.
pub fn lieb_thirring_sides(a: &Mat, b: &Mat, r: f64) -> Result<Sides> {
    same_shape(a, b)?;
    linalg::ensure_symmetric(a)?;
    linalg::ensure_symmetric(b)?;
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent {r} below 1")));
    }
    let b_half = linalg::psd_sqrt(b)?;
    let a_r = linalg::psd_pow(a, r)?;
    let inner = &b_half * a * &b_half;
    let lhs = linalg::psd_pow(&linalg::symmetrize(&inner), r)?.trace();
    let b_r2 = linalg::psd_pow(b, r / 2.0)?;
    let rhs = (&b_r2 * a_r * &b_r2).trace();
    let n = a.nrows() as f64;
    Ok(Sides {
        lhs,
        rhs,
        scale: n * (linalg::op_norm(a) * linalg::op_norm(b)).powf(r),
    })
}

pub fn check_lieb_thirring(a: &Mat, b: &Mat, r: f64) -> Result<bool> {
    Ok(lieb_thirring_sides(a, b, r)?.holds())
}

/// `Tr(A^α B A^{1−α} B)` against `Tr(A B²)`.
pub fn lieb_sides(a: &Mat, b: &Mat, alpha: f64) -> Result<Sides> {
    same_shape(a, b)?;
    linalg::ensure_symmetric(a)?;
    linalg::ensure_symmetric(b)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    let a_alpha = linalg::psd_pow(a, alpha)?;
    let a_rest = linalg::psd_pow(a, 1.0 - alpha)?;
    let lhs = (a_alpha * b * a_rest * b).trace();
    let rhs = (a * b * b).trace();
    let n = a.nrows() as f64;
    Ok(Sides {
        lhs,
        rhs,
        scale: n * linalg::op_norm(a) * linalg::op_norm(b).powi(2),
    })
}

pub fn check_lieb(a: &Mat, b: &Mat, alpha: f64) -> Result<bool> {
    Ok(lieb_sides(a, b, alpha)?.holds())
}

fn deterministic_report(lemma_id: &str, sides: Sides) -> IneqTrialReport {
    IneqTrialReport::single(lemma_id, !sides.holds(), sides.slack(), false)
}

/// Lieb–Thirring exponents and Lieb `α` values exercised by the suite.
pub const LT_EXPONENTS: [f64; 2] = [2.0, 3.0];
pub const LIEB_ALPHAS: [f64; 3] = [0.25, 0.5, 0.75];

/// Run `trials` random instances of every deterministic inequality on one
/// ensemble. Hölder exponents are drawn uniformly from `s ∈ [1, 4]`.
pub fn deterministic_suite(
    ensemble: &MatrixEnsemble,
    trials: usize,
) -> Result<Vec<IneqTrialReport>> {
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<Vec<IneqTrialReport>> {
            let mut rng = ensemble.trial_rng("deterministic", i as u64);
            let (a, b) = (ensemble.draw(&mut rng), ensemble.draw(&mut rng));
            let (ap, bp) = (ensemble.draw_psd(&mut rng), ensemble.draw_psd(&mut rng));
            let s = 1.0 + 3.0 * rng.random::<f64>();
            let t = s / (s - 1.0);
            let mut out = vec![deterministic_report("holder", holder_sides(&a, &b, s, t)?)];
            for r in LT_EXPONENTS {
                out.push(deterministic_report(
                    &format!("lieb_thirring_r{r}"),
                    lieb_thirring_sides(&ap, &bp, r)?,
                ));
            }
            for alpha in LIEB_ALPHAS {
                out.push(deterministic_report(
                    &format!("lieb_a{alpha}"),
                    lieb_sides(&ap, &b, alpha)?,
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let width = per_trial.first().map_or(0, Vec::len);
    Ok((0..width)
        .map(|k| {
            let id = per_trial[0][k].lemma_id.clone();
            merge_all(&id, per_trial.iter().map(|v| v[k].clone()))
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Shared-pair tensor estimates

/// Batch sums of `(xᵀA₁y)(xᵀA₂y)(xᵀA₃y)` for every term, all on the same
/// `(x, y)` pairs.
pub fn shared_pair_terms(
    spec: &DistributionSpec,
    terms: &[[&Mat; 3]],
    pairs: usize,
    seed: u64,
) -> Result<BatchSums> {
    for term in terms {
        for m in term {
            linalg::ensure_dim(m, spec.dim())?;
            linalg::ensure_symmetric(m)?;
        }
    }
    crate::moments::pair_batches(spec, spec, pairs, seed, terms.len(), |x, y, acc| {
        for (k, [a, b, c]) in terms.iter().enumerate() {
            acc[k] += sorted_product([bilinear(x, a, y), bilinear(x, b, y), bilinear(x, c, y)]);
        }
    })
}

/// A stochastic `lhs ≤ rhs` comparison with the standard error of the
/// difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    /// Estimate of `lhs − rhs`.
    pub diff: Estimate,
}

/// Number of standard errors separating a violation from noise.
pub const CI_WIDTH: f64 = 3.0;

impl Comparison {
    fn tolerance(&self) -> f64 {
        1e-9 * (self.lhs.abs() + self.rhs.abs())
    }

    /// `lhs − rhs` exceeds zero by more than the CI half-width.
    pub fn ci_violated(&self) -> bool {
        self.diff.value > CI_WIDTH * self.diff.std_error + self.tolerance()
    }

    /// Point estimate crossed the bound.
    pub fn crossed(&self) -> bool {
        self.diff.value > self.tolerance()
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// Report for a hard check: CI-separated crossings are violations.
    pub fn hard_report(&self, lemma_id: &str) -> IneqTrialReport {
        let violated = self.ci_violated();
        IneqTrialReport::single(
            lemma_id,
            violated,
            self.slack(),
            self.crossed() && !violated,
        )
    }

    /// Report for a slack-only check: never a violation; CI-separated
    /// crossings are flagged.
    pub fn slack_report(&self, lemma_id: &str) -> IneqTrialReport {
        IneqTrialReport::single(lemma_id, false, self.slack(), self.ci_violated())
    }
}

fn linear_comparison(sums: &BatchSums, lhs: &[f64], rhs: &[f64]) -> Comparison {
    let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let means = sums.means();
    let dot = |c: &[f64]| c.iter().zip(&means).map(|(a, b)| a * b).sum::<f64>();
    Comparison {
        lhs: dot(lhs),
        rhs: dot(rhs),
        diff: sums.estimate_linear(&diff),
    }
}

/// `T(B₁,B₂,B₃) ≤ T(|B₁|,|B₂|,|B₃|)` on shared pairs.
pub fn trabs_comparison(
    spec: &DistributionSpec,
    b1: &Mat,
    b2: &Mat,
    b3: &Mat,
    pairs: usize,
    seed: u64,
) -> Result<Comparison> {
    for m in [b1, b2, b3] {
        linalg::ensure_symmetric(m)?;
    }
    let (a1, a2, a3) = (linalg::abs(b1), linalg::abs(b2), linalg::abs(b3));
    let sums = shared_pair_terms(spec, &[[b1, b2, b3], [&a1, &a2, &a3]], pairs, seed)?;
    Ok(linear_comparison(&sums, &[1.0, 0.0], &[0.0, 1.0]))
}

pub fn check_trabs(
    spec: &DistributionSpec,
    b1: &Mat,
    b2: &Mat,
    b3: &Mat,
    pairs: usize,
    seed: u64,
) -> Result<IneqTrialReport> {
    Ok(trabs_comparison(spec, b1, b2, b3, pairs, seed)?.hard_report("trabs"))
}

/// `T(A₁,A₂,A₃) ≥ 0` for PSD arguments.
pub fn check_psd_positivity(
    spec: &DistributionSpec,
    a1: &Mat,
    a2: &Mat,
    a3: &Mat,
    pairs: usize,
    seed: u64,
) -> Result<IneqTrialReport> {
    for m in [a1, a2, a3] {
        linalg::ensure_psd(m)?;
    }
    let sums = shared_pair_terms(spec, &[[a1, a2, a3]], pairs, seed)?;
    // lhs = 0, rhs = T: the difference is −T.
    Ok(linear_comparison(&sums, &[0.0], &[1.0]).hard_report("psd_positivity"))
}

/// Plug-in constants for the slack-only `tinq` items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinqParams {
    /// Estimate substituted for the KLS constants (e.g. a halfspace Cheeger
    /// estimate).
    pub psi: f64,
    /// Growth constant `α` in `ψ_k ≤ α k^β`.
    pub alpha: f64,
    /// Growth exponent `β ∈ [0, 1/2]`.
    pub beta: f64,
    /// Multiplier standing in for the unspecified `O(·)` constant.
    pub constant: f64,
    /// Hölder exponent `s` of item 5 (`t = s/(s−1)`).
    pub s: f64,
}

impl Default for TinqParams {
    fn default() -> Self {
        TinqParams {
            psi: std::f64::consts::PI.sqrt() / std::f64::consts::SQRT_2,
            alpha: 1.0,
            beta: 0.0,
            constant: 1.0,
            s: 2.0,
        }
    }
}

/// Numerical rank of a symmetric matrix.
pub fn numerical_rank(m: &Mat) -> usize {
    let e = linalg::eigh(m);
    let top = e.max_abs_value();
    e.values.iter().filter(|l| l.abs() > 1e-12 * top).count()
}

/// `(Tr|B|^{1/(2β)})^{2β}`, which tends to `‖B‖_op` as `β → 0`.
pub fn schatten_factor(b: &Mat, beta: f64) -> f64 {
    if beta <= 0.0 {
        linalg::op_norm(b)
    } else {
        linalg::schatten_norm(b, 1.0 / (2.0 * beta))
    }
}

/// One `tinq` item. Items 1 and 5 are hard checks; items 2–4 compare
/// against plug-in constants and only report slack.
pub fn check_tinq(
    spec: &DistributionSpec,
    item: u8,
    a: &Mat,
    b: &Mat,
    pairs: usize,
    seed: u64,
    params: &TinqParams,
) -> Result<IneqTrialReport> {
    let id = format!("tinq{item}");
    let c = tinq_comparison(spec, item, a, b, pairs, seed, params)?;
    Ok(match item {
        1 | 5 => c.hard_report(&id),
        _ => c.slack_report(&id),
    })
}

pub fn tinq_comparison(
    spec: &DistributionSpec,
    item: u8,
    a: &Mat,
    b: &Mat,
    pairs: usize,
    seed: u64,
    params: &TinqParams,
) -> Result<Comparison> {
    let n = spec.dim();
    let eye = Mat::identity(n, n);
    linalg::ensure_dim(a, n)?;
    linalg::ensure_dim(b, n)?;
    let tr_abs_a = linalg::trace_abs_pow(a, 1.0);
    let psi2 = params.psi * params.psi;
    match item {
        1 => {
            let sums =
                shared_pair_terms(spec, &[[a, &eye, &eye], [&eye, &eye, &eye]], pairs, seed)?;
            Ok(linear_comparison(
                &sums,
                &[1.0, 0.0],
                &[0.0, linalg::op_norm(a)],
            ))
        }
        2 => {
            let sums = shared_pair_terms(spec, &[[a, &eye, &eye]], pairs, seed)?;
            let bound = params.constant * psi2 * tr_abs_a;
            Ok(constant_comparison(&sums, bound))
        }
        3 => {
            let sums = shared_pair_terms(spec, &[[a, b, &eye]], pairs, seed)?;
            let bound = params.constant * psi2 * linalg::op_norm(b) * tr_abs_a;
            Ok(constant_comparison(&sums, bound))
        }
        4 => {
            if !(0.0..=0.5).contains(&params.beta) || params.alpha < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "need alpha >= 1 and beta in [0, 1/2], got {} and {}",
                    params.alpha, params.beta
                )));
            }
            let sums = shared_pair_terms(spec, &[[a, b, &eye]], pairs, seed)?;
            let log_n = (n as f64).ln().max(1.0);
            let bound = params.constant
                * params.alpha.powi(2)
                * log_n
                * schatten_factor(b, params.beta)
                * tr_abs_a;
            Ok(constant_comparison(&sums, bound))
        }
        5 => {
            let s = params.s;
            if !(s > 1.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "exponent s = {s} must exceed 1"
                )));
            }
            let t = s / (s - 1.0);
            let a_s = linalg::abs_pow(a, s);
            let b_t = linalg::abs_pow(b, t);
            let sums = shared_pair_terms(
                spec,
                &[[a, b, &eye], [&a_s, &eye, &eye], [&b_t, &eye, &eye]],
                pairs,
                seed,
            )?;
            let m = sums.means();
            let (m1, m2) = (m[1].max(0.0), m[2].max(0.0));
            let rhs = m1.powf(1.0 / s) * m2.powf(1.0 / t);
            let mut grad = vec![1.0, 0.0, 0.0];
            if m1 > 0.0 && m2 > 0.0 {
                grad[1] = -rhs / (s * m1);
                grad[2] = -rhs / (t * m2);
            }
            Ok(Comparison {
                lhs: m[0],
                rhs,
                diff: sums.estimate_delta(m[0] - rhs, &grad),
            })
        }
        _ => Err(Error::InvalidArgument(format!(
            "tinq item {item} not in 1..=5"
        ))),
    }
}

fn constant_comparison(sums: &BatchSums, bound: f64) -> Comparison {
    let mut diff = sums.estimate(0);
    diff.value -= bound;
    Comparison {
        lhs: sums.mean(0),
        rhs: bound,
        diff,
    }
}

/// `T(B^{1/2}A^αB^{1/2}, B^{1/2}A^{1−α}B^{1/2}, C) ≤ T(B^{1/2}AB^{1/2}, B, C)`.
pub fn liebtr_comparison(
    spec: &DistributionSpec,
    a: &Mat,
    b: &Mat,
    c: &Mat,
    alpha: f64,
    pairs: usize,
    seed: u64,
) -> Result<Comparison> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    linalg::ensure_psd(c)?;
    let b_half = linalg::psd_sqrt(b)?;
    let sandwich = |m: &Mat| linalg::symmetrize(&(&b_half * m * &b_half));
    let l1 = sandwich(&linalg::psd_pow(a, alpha)?);
    let l2 = sandwich(&linalg::psd_pow(a, 1.0 - alpha)?);
    let r1 = sandwich(a);
    let sums = shared_pair_terms(spec, &[[&l1, &l2, c], [&r1, b, c]], pairs, seed)?;
    Ok(linear_comparison(&sums, &[1.0, 0.0], &[0.0, 1.0]))
}

#[allow(clippy::too_many_arguments)]
pub fn check_liebtr_tensor(
    spec: &DistributionSpec,
    a: &Mat,
    b: &Mat,
    c: &Mat,
    alpha: f64,
    pairs: usize,
    seed: u64,
) -> Result<IneqTrialReport> {
    Ok(liebtr_comparison(spec, a, b, c, alpha, pairs, seed)?.hard_report("liebtr"))
}

// ---------------------------------------------------------------------------
// V-statistic identity

/// Both forms of the pair statistic `T̂(A, B, I)` on one sample, with the
/// L1 mass of the V-statistic terms as the rounding scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TequSides {
    pub v_statistic: f64,
    pub delta_form: f64,
    pub scale: f64,
}

impl TequSides {
    pub fn relative_deviation(&self) -> f64 {
        let d = (self.v_statistic - self.delta_form).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.scale
        }
    }
}

/// V-statistic over all ordered pairs versus `Σ_k Tr(A Δ̂_k B Δ̂_k)` with
/// `Δ̂_k = (1/N) Σ_i x_i x_iᵀ x_{ik}`.
pub fn tequ_sides(data: &SampleMatrix, a: &Mat, b: &Mat) -> Result<TequSides> {
    let n = data.cols();
    linalg::ensure_dim(a, n)?;
    linalg::ensure_dim(b, n)?;
    linalg::ensure_symmetric(a)?;
    linalg::ensure_symmetric(b)?;
    let rows = data.rows();
    let x = Mat::from_row_slice(rows, n, data.data());
    let xa = &x * a;
    let xb = &x * b;
    let pa = &xa * x.transpose();
    let pb = &xb * x.transpose();
    let g = &x * x.transpose();
    let mut v = 0.0;
    let mut mass = 0.0;
    for j in 0..rows {
        for i in 0..rows {
            let term = pa[(i, j)] * pb[(i, j)] * g[(i, j)];
            v += term;
            mass += term.abs();
        }
    }
    let nn = (rows * rows) as f64;
    let mut delta_form = 0.0;
    for k in 0..n {
        let mut weighted = x.clone();
        for i in 0..rows {
            let w = x[(i, k)];
            for c in 0..n {
                weighted[(i, c)] *= w;
            }
        }
        let delta = x.transpose() * weighted / rows as f64;
        delta_form += (a * &delta * b * &delta).trace();
    }
    Ok(TequSides {
        v_statistic: v / nn,
        delta_form,
        scale: (mass / nn).max(f64::MIN_POSITIVE),
    })
}

pub const TEQU_TOLERANCE: f64 = 1e-10;

pub fn check_tequ_identity(
    spec: &DistributionSpec,
    a: &Mat,
    b: &Mat,
    samples: usize,
    seed: u64,
) -> Result<IneqTrialReport> {
    let data = sample(spec, samples, seed)?;
    let dev = tequ_sides(&data, a, b)?.relative_deviation();
    Ok(IneqTrialReport::single(
        "tequ",
        !(dev < TEQU_TOLERANCE),
        TEQU_TOLERANCE - dev,
        false,
    ))
}

// ---------------------------------------------------------------------------
// Stochastic suite

/// Per-trial budgets for [`stochastic_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticBudget {
    pub trials: usize,
    pub pairs: usize,
    /// Sample size for the V-statistic identity.
    pub tequ_samples: usize,
    pub liebtr_alpha: f64,
}

impl Default for StochasticBudget {
    fn default() -> Self {
        StochasticBudget {
            trials: 200,
            pairs: 20_000,
            tequ_samples: 400,
            liebtr_alpha: 0.5,
        }
    }
}

/// Every stochastic tensor check on one spec. Symmetric inputs come from
/// `ensemble`; PSD inputs from its PSD map.
pub fn stochastic_suite(
    spec: &DistributionSpec,
    ensemble: &MatrixEnsemble,
    budget: &StochasticBudget,
    params: &TinqParams,
) -> Result<Vec<IneqTrialReport>> {
    let per_trial = (0..budget.trials)
        .into_par_iter()
        .map(|i| -> Result<Vec<IneqTrialReport>> {
            let mut rng = ensemble.trial_rng("stochastic", i as u64);
            let sym: Vec<Mat> = (0..3).map(|_| ensemble.draw(&mut rng)).collect();
            let psd: Vec<Mat> = (0..3).map(|_| ensemble.draw_psd(&mut rng)).collect();
            let seed = rng::derive_seed(ensemble.seed, "stochastic-pairs", i as u64);
            let pairs = budget.pairs;
            let mut out = vec![
                check_tequ_identity(spec, &sym[0], &sym[1], budget.tequ_samples, seed)?,
                check_trabs(spec, &sym[0], &sym[1], &sym[2], pairs, seed)?,
                check_psd_positivity(spec, &psd[0], &psd[1], &psd[2], pairs, seed)?,
            ];
            for item in 1..=5u8 {
                out.push(check_tinq(
                    spec, item, &sym[0], &sym[1], pairs, seed, params,
                )?);
            }
            out.push(check_liebtr_tensor(
                spec,
                &psd[0],
                &psd[1],
                &psd[2],
                budget.liebtr_alpha,
                pairs,
                seed,
            )?);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let width = per_trial.first().map_or(0, Vec::len);
    Ok((0..width)
        .map(|k| {
            let id = per_trial[0][k].lemma_id.clone();
            merge_all(&id, per_trial.iter().map(|v| v[k].clone()))
        })
        .collect())
}

/// Lemma ids whose violations are bugs rather than exceeded constants.
pub fn is_hard_check(lemma_id: &str) -> bool {
    !matches!(lemma_id, "tinq2" | "tinq3" | "tinq4")
}
