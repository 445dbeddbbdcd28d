use lclab::rng::stream;
use lclab::stats::binomial_se;
use lclab::{sample, DistributionSpec, Family};
use proptest::prelude::*;

fn norms(family: Family, n: usize, count: usize, seed: u64) -> Vec<f64> {
    let spec = DistributionSpec::new(family, n).unwrap();
    let s = sample(&spec, count, seed).unwrap();
    s.iter_rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

#[test]
fn moment_growth_bound_has_tenfold_slack() {
    for family in Family::ALL {
        let r = norms(family, 8, 200_000, 11);
        let m2 = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
        for k in [3i32, 4, 6] {
            let mk = r.iter().map(|v| v.powi(k)).sum::<f64>() / r.len() as f64;
            let bound = (2.0 * k as f64).powi(k) * m2.powf(k as f64 / 2.0);
            assert!(10.0 * mk <= bound, "{family} k={k}: {mk} vs {bound}");
        }
    }
}

#[test]
fn norm_tail_is_below_exponential_bound() {
    let (t, c, n) = (2.0f64, 3.0, 8usize);
    let bound = (-t * (n as f64).sqrt()).exp();
    for family in Family::ALL {
        let r = norms(family, n, 1_000_000, 12);
        let hits = r.iter().filter(|&&v| v > c * t * (n as f64).sqrt()).count();
        let p = hits as f64 / r.len() as f64;
        assert!(
            hits == 0 || p <= bound + 3.0 * binomial_se(bound, r.len()),
            "{family}: {p} vs {bound}"
        );
    }
}

#[test]
fn small_ball_probability_is_bounded() {
    let (eps, n) = (0.1f64, 16usize);
    let bound = eps.powf(0.1 * (n as f64).sqrt());
    for family in Family::ALL {
        let r = norms(family, n, 200_000, 13);
        let p = r.iter().filter(|&&v| v <= eps * (n as f64).sqrt()).count() as f64 / r.len() as f64;
        assert!(
            p <= bound + 3.0 * binomial_se(bound, r.len()),
            "{family}: {p}"
        );
    }
}

#[test]
fn density_examples() {
    let lap = DistributionSpec::new(Family::LaplaceProd, 2).unwrap();
    let d = lap.log_density(&[0.0, 0.0]).unwrap() - lap.log_density(&[1.0, 0.0]).unwrap();
    assert!((d - 2f64.sqrt()).abs() < 1e-12);

    let cube = DistributionSpec::new(Family::Cube, 3).unwrap();
    assert!(cube.log_density(&[0.0, 0.5, -1.0]).unwrap().is_finite());
    assert_eq!(
        cube.log_density(&[0.0, 2.0, 0.0]).unwrap(),
        f64::NEG_INFINITY
    );

    let g = DistributionSpec::new(Family::Gaussian, 2).unwrap();
    let d = g.log_density(&[1.0, 1.0]).unwrap() - g.log_density(&[0.0, 0.0]).unwrap();
    assert!((d + 1.0).abs() < 1e-12);
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    let spec = DistributionSpec::new(Family::Ball, 5).unwrap();
    let a = sample(&spec, 3000, 7).unwrap();
    let b = sample(&spec, 3000, 7).unwrap();
    let c = sample(&spec, 3000, 8).unwrap();
    assert_eq!(a.data(), b.data());
    assert_ne!(a.data(), c.data());
    // A prefix of a larger draw equals the smaller draw.
    let big = sample(&spec, 5000, 7).unwrap();
    assert_eq!(&big.data()[..a.data().len()], a.data());
}

fn family_strategy() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn midpoint_log_concavity(family in family_strategy(), n in 1usize..10, seed in any::<u64>()) {
        let spec = DistributionSpec::new(family, n).unwrap();
        let mut rng = stream(seed, 0);
        for _ in 0..1000 {
            let x = spec.draw(&mut rng);
            let y = spec.draw(&mut rng);
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let lm = spec.log_density(&mid).unwrap();
            let avg = 0.5 * (spec.log_density(&x).unwrap() + spec.log_density(&y).unwrap());
            prop_assert!(lm >= avg - 1e-9, "{} {} {}", family, lm, avg);
        }
    }

    #[test]
    fn draws_lie_in_support(family in family_strategy(), n in 1usize..12, seed in any::<u64>()) {
        let spec = DistributionSpec::new(family, n).unwrap();
        let s = sample(&spec, 200, seed).unwrap();
        for row in s.iter_rows() {
            prop_assert!(spec.log_density(row).unwrap().is_finite());
        }
    }
}
