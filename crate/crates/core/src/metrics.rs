//! One-dimensional Wasserstein and total-variation machinery.
//!
//! In one dimension the monotone (quantile) coupling is optimal for every
//! convex cost, so every `W_p` here is computed by matching order statistics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::{normal_quantile, sorted_quantile};

/// Sorted scalar sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical1D {
    values: Vec<f64>,
}

impl Empirical1D {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("sample contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Quantile at probability `u` under the plotting-position convention:
    /// the `i`-th order statistic (1-based) sits at `(i - 0.5)/N`, linear in
    /// between and flat beyond the extremes.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.values.len();
        let h = (u * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        self.values[lo] + (h - lo as f64) * (self.values[hi] - self.values[lo])
    }

    /// New sample with every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut v: Vec<f64> = self.values.iter().map(|x| x * k).collect();
        v.sort_by(f64::total_cmp);
        Self { values: v }
    }
}

/// Outcome of a one-sided inequality check `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `rhs - lhs`.
    pub slack: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "name,lhs,rhs,satisfied,slack";

    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs <= rhs + tolerance,
            slack: rhs - lhs,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{},{:e}",
            self.name, self.lhs, self.rhs, self.satisfied, self.slack
        )
    }
}

fn check_order(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "Wasserstein order must be >= 1, got {p}"
        )));
    }
    Ok(())
}

/// Sum `f(i)` for `i in 0..n` in fixed-size chunks so the floating-point
/// result does not depend on the thread count.
fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    const CHUNK: usize = 1 << 14;
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    partial.into_iter().sum()
}

/// `E|a - b|^p` under the monotone coupling.
pub fn monotone_cost(a: &Empirical1D, b: &Empirical1D, p: f64) -> Result<f64> {
    check_order(p)?;
    let (na, nb) = (a.count(), b.count());
    let total = if na == nb {
        chunked_sum(na, |i| (a.values[i] - b.values[i]).abs().powf(p))
    } else {
        let n = na.max(nb);
        chunked_sum(n, |i| {
            let u = (i as f64 + 0.5) / n as f64;
            (a.quantile(u) - b.quantile(u)).abs().powf(p)
        })
    };
    Ok(total / na.max(nb) as f64)
}

/// Empirical `W_p` between two scalar samples.
pub fn w_p_empirical(a: &Empirical1D, b: &Empirical1D, p: f64) -> Result<f64> {
    Ok(monotone_cost(a, b, p)?.powf(1.0 / p))
}

/// `E|a - G|^p` with `G ~ N(0, variance)` coupled through its quantiles at
/// the plotting positions.
pub fn monotone_cost_vs_normal(a: &Empirical1D, variance: f64, p: f64) -> Result<f64> {
    check_order(p)?;
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variance must be positive, got {variance}"
        )));
    }
    let n = a.count();
    let sd = variance.sqrt();
    let total = chunked_sum(n, |i| {
        let z = sd * normal_quantile((i as f64 + 0.5) / n as f64);
        (a.values[i] - z).abs().powf(p)
    });
    Ok(total / n as f64)
}

/// `W_p` between a scalar sample and `N(0, variance)`.
pub fn w_p_vs_normal(a: &Empirical1D, variance: f64, p: f64) -> Result<f64> {
    Ok(monotone_cost_vs_normal(a, variance, p)?.powf(1.0 / p))
}

/// Histogram estimate of the total-variation distance. Both samples share a
/// grid whose bin width follows the Freedman–Diaconis rule on the pooled
/// sample.
pub fn tv_estimate(a: &Empirical1D, b: &Empirical1D) -> f64 {
    let mut pooled: Vec<f64> = a.values.iter().chain(&b.values).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let n = pooled.len();
    let (lo, hi) = (pooled[0], pooled[n - 1]);
    let range = hi - lo;
    if range <= 0.0 {
        return 0.0;
    }
    let iqr = sorted_quantile(&pooled, 0.75) - sorted_quantile(&pooled, 0.25);
    let mut width = 2.0 * iqr / (n as f64).cbrt();
    if !(width > 0.0) {
        width = range / (n as f64).sqrt();
    }
    const MAX_BINS: usize = 1 << 22;
    let bins = ((range / width).ceil() as usize).clamp(1, MAX_BINS);
    let width = range / bins as f64;
    let histogram = |s: &Empirical1D| {
        let mut h = vec![0usize; bins];
        for &x in &s.values {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            h[k] += 1;
        }
        h
    };
    let (ha, hb) = (histogram(a), histogram(b));
    let (na, nb) = (a.count() as f64, b.count() as f64);
    0.5 * ha
        .iter()
        .zip(&hb)
        .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
        .sum::<f64>()
}

/// Default constant in `d_TV <= C · sqrt(W_1)`.
pub const DEFAULT_C_TV: f64 = 2.5;
/// Default constant in the `W_t` vs `W_s` comparison.
pub const DEFAULT_C_WS: f64 = 10.0;

/// `d_TV(a, b) <= C · sqrt(W_1(a, b))` for isotropic log-concave scalar laws.
pub fn check_tv_w1(a: &Empirical1D, b: &Empirical1D, c: f64) -> Result<MetricReport> {
    let tv = tv_estimate(a, b);
    let w1 = w_p_empirical(a, b, 1.0)?;
    Ok(MetricReport::new("tv_w1", tv, c * w1.sqrt(), 0.0))
}

/// Right-hand side of the `W_t` vs `W_s` comparison for normalised inner
/// products in dimension `n`, given `ws_pow = W_s^s`.
pub fn ws_wt_bound(ws_pow: f64, s: f64, t: f64, n: usize, c: f64) -> f64 {
    let big = c.powf(t) * t.powf(2.0 * t);
    let head = if ws_pow > 0.0 {
        let log = (big / ws_pow).ln().max(0.0);
        c * ws_pow * log.powf(t - s)
    } else {
        0.0
    };
    head + big * (-c * (n as f64).sqrt()).exp()
}

/// Compares `W_t^t`, evaluated under the `W_s`-optimal (monotone) coupling,
/// against its bound in terms of `W_s^s`. Inputs are expected on the
/// `⟨x,y⟩/√n` scale.
pub fn check_ws_wt(
    a: &Empirical1D,
    b: &Empirical1D,
    s: f64,
    t: f64,
    n: usize,
    c: f64,
) -> Result<MetricReport> {
    check_order(s)?;
    if !(s < t) {
        return Err(Error::InvalidArgument(format!(
            "need s < t, got s = {s}, t = {t}"
        )));
    }
    let lhs = monotone_cost(a, b, t)?;
    let ws_pow = monotone_cost(a, b, s)?;
    let rhs = ws_wt_bound(ws_pow, s, t, n, c);
    Ok(MetricReport::new(
        format!("ws_wt_s{s}_t{t}"),
        lhs,
        rhs,
        1e-12 * rhs.abs(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emp(v: &[f64]) -> Empirical1D {
        Empirical1D::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert_eq!(Empirical1D::new(vec![]), Err(Error::EmptySample));
        assert!(Empirical1D::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = emp(&[0.3, -1.0, 2.5]);
        assert_eq!(w_p_empirical(&a, &a, 2.0).unwrap(), 0.0);
        assert_eq!(tv_estimate(&a, &a), 0.0);
    }

    #[test]
    fn unit_shift() {
        let (a, b) = (emp(&[0.0, 1.0]), emp(&[1.0, 2.0]));
        assert_eq!(w_p_empirical(&a, &b, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn translation_gives_shift() {
        let a = emp(&[0.1, -0.4, 2.0, 0.9, -3.2]);
        let b = emp(&a.values().iter().map(|x| x + 0.75).collect::<Vec<_>>());
        assert!((w_p_empirical(&a, &b, 2.0).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn order_below_one_rejected() {
        let a = emp(&[0.0]);
        assert!(w_p_empirical(&a, &a, 0.5).is_err());
        assert!(w_p_vs_normal(&a, 1.0, 0.9).is_err());
    }

    #[test]
    fn non_positive_variance_rejected() {
        let a = emp(&[0.0]);
        assert!(w_p_vs_normal(&a, 0.0, 2.0).is_err());
        assert!(w_p_vs_normal(&a, -1.0, 2.0).is_err());
    }

    #[test]
    fn unequal_sizes_interpolate_quantiles() {
        // At positions 1/6, 1/2, 5/6 the two-point sample reads 0, 0.5, 1
        // (flat beyond 1/4 and 3/4), the three-point one 0, 1, 5.
        let (a, b) = (emp(&[0.0, 1.0]), emp(&[0.0, 1.0, 5.0]));
        let w1 = w_p_empirical(&a, &b, 1.0).unwrap();
        assert!((w1 - 1.5).abs() < 1e-12, "{w1}");
        assert_eq!(
            w_p_empirical(&a, &b, 1.0).unwrap(),
            w_p_empirical(&b, &a, 1.0).unwrap()
        );
    }

    #[test]
    fn point_mass_vs_normal() {
        // W_2(δ_0, N(0,1))^2 = ∫ x² φ = 1; the plotting-position sum
        // converges to it from below.
        let a = emp(&vec![0.0; 200_000]);
        let w2 = w_p_vs_normal(&a, 1.0, 2.0).unwrap();
        assert!((w2 - 1.0).abs() < 1e-3, "{w2}");
    }

    #[test]
    fn disjoint_supports_have_unit_tv() {
        let a = emp(&(0..1000).map(|i| i as f64 / 1000.0).collect::<Vec<_>>());
        let b = emp(&(0..1000)
            .map(|i| 5.0 + i as f64 / 1000.0)
            .collect::<Vec<_>>());
        assert!((tv_estimate(&a, &b) - 1.0).abs() < 0.01);
    }

    #[test]
    fn tv_w1_on_identical_samples() {
        let a = emp(&[0.0, 1.0, 2.0]);
        let r = check_tv_w1(&a, &a, DEFAULT_C_TV).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.satisfied);
    }

    #[test]
    fn ws_wt_requires_s_below_t() {
        let a = emp(&[0.0, 1.0]);
        assert!(check_ws_wt(&a, &a, 3.0, 2.0, 8, 10.0).is_err());
        assert!(check_ws_wt(&a, &a, 2.0, 2.0, 8, 10.0).is_err());
        let r = check_ws_wt(&a, &a, 2.0, 3.0, 8, 10.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.satisfied);
    }

    #[test]
    fn report_csv_row() {
        let r = MetricReport::new("x", 1.0, 2.0, 0.0);
        assert_eq!(r.to_csv_row(), "x,1e0,2e0,true,1e0");
    }
}
