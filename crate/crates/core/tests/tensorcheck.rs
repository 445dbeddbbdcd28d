use lclab::linalg::{self, Mat};
use lclab::moments::tensor_t;
use lclab::rng::stream;
use lclab::tensorcheck::{
    check_lieb, check_liebtr_tensor, check_matrix_holder, check_psd_positivity,
    check_tequ_identity, check_tinq, check_trabs, deterministic_suite, holder_sides, lieb_sides,
    lieb_thirring_sides, liebtr_comparison, numerical_rank, tinq_comparison, trabs_comparison,
    EnsembleKind, IneqTrialReport, MatrixEnsemble, TinqParams,
};
use lclab::{DistributionSpec, Error, Family};
use proptest::prelude::*;

fn spec(f: Family, n: usize) -> DistributionSpec {
    DistributionSpec::new(f, n).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = EnsembleKind> {
    prop_oneof![
        Just(EnsembleKind::PsdWishart),
        Just(EnsembleKind::SymmetricGoe),
        Just(EnsembleKind::Diagonal),
        Just(EnsembleKind::LowRank(1)),
        Just(EnsembleKind::Projection(1)),
    ]
}

fn draws(kind: EnsembleKind, n: usize, seed: u64) -> (Mat, Mat, Mat, Mat) {
    let e = MatrixEnsemble::new(kind, n, seed).unwrap();
    let mut rng = e.trial_rng("prop", 0);
    (
        e.draw(&mut rng),
        e.draw(&mut rng),
        e.draw_psd(&mut rng),
        e.draw_psd(&mut rng),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn holder_never_fails(kind in kind_strategy(), n in 1usize..10, seed in any::<u64>(), s in 1.01f64..6.0) {
        let (a, b, _, _) = draws(kind, n, seed);
        prop_assert!(check_matrix_holder(&a, &b, s, s / (s - 1.0)).unwrap());
    }

    #[test]
    fn lieb_thirring_never_fails(kind in kind_strategy(), n in 1usize..10, seed in any::<u64>(), r in 1.0f64..4.0) {
        let (_, _, a, b) = draws(kind, n, seed);
        prop_assert!(lieb_thirring_sides(&a, &b, r).unwrap().holds());
    }

    #[test]
    fn lieb_never_fails(kind in kind_strategy(), n in 1usize..10, seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let (_, b, a, _) = draws(kind, n, seed);
        prop_assert!(check_lieb(&a, &b, alpha).unwrap());
    }

    #[test]
    fn ensembles_match_their_kind(kind in kind_strategy(), n in 1usize..10, seed in any::<u64>()) {
        let e = MatrixEnsemble::new(kind, n, seed).unwrap();
        let mut rng = e.trial_rng("shape", 0);
        let m = e.draw(&mut rng);
        prop_assert!(linalg::asymmetry(&m) <= 1e-12);
        if kind.is_psd() {
            prop_assert!(linalg::ensure_psd(&m).is_ok());
        }
        match kind {
            EnsembleKind::LowRank(r) => prop_assert!(numerical_rank(&m) <= r),
            EnsembleKind::Projection(r) => {
                prop_assert_eq!(numerical_rank(&m), r);
                prop_assert!(linalg::max_abs(&(&m * &m - &m)) < 1e-12);
            }
            EnsembleKind::Diagonal => {
                prop_assert!(m.iter().enumerate().all(|(k, v)| k % (n + 1) == 0 || *v == 0.0));
            }
            _ => {}
        }
    }

    #[test]
    fn tequ_identity_is_exact(
        family in prop::sample::select(Family::ALL.to_vec()),
        n in 1usize..6,
        samples in 2usize..120,
        seed in any::<u64>(),
    ) {
        let e = MatrixEnsemble::new(EnsembleKind::SymmetricGoe, n, seed).unwrap();
        let mut rng = e.trial_rng("tequ", 0);
        let (a, b) = (e.draw(&mut rng), e.draw(&mut rng));
        let r = check_tequ_identity(&spec(family, n), &a, &b, samples, seed).unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }
}

#[test]
fn holder_rejects_non_conjugate_exponents() {
    let a = Mat::identity(2, 2);
    assert!(matches!(
        holder_sides(&a, &a, 2.0, 3.0),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        lieb_sides(&a, &a, 1.5),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn holder_with_huge_conjugate_exponent() {
    // s → 1 sends t → ∞, where Tr|B|^t underflows unless rescaled.
    let a = Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.2]);
    let s = 1.0 + 1e-4;
    let sides = holder_sides(&a, &a, s, s / (s - 1.0)).unwrap();
    assert!(sides.holds(), "{sides:?}");
    let op = linalg::op_norm(&a);
    let trace_norm = linalg::trace_abs_pow(&a, 1.0);
    assert!(
        (sides.rhs - trace_norm * op).abs() < 1e-3 * sides.rhs,
        "{sides:?}"
    );
}

#[test]
fn lieb_equality_cases() {
    let e = MatrixEnsemble::new(EnsembleKind::PsdWishart, 5, 3).unwrap();
    let g = MatrixEnsemble::new(EnsembleKind::SymmetricGoe, 5, 3).unwrap();
    let mut rng = stream(3, 0);
    let a = e.draw(&mut rng);
    let b = g.draw(&mut rng);
    let s = lieb_sides(&a, &b, 1.0).unwrap();
    assert!((s.lhs - s.rhs).abs() < 1e-10 * s.scale);
    // Commuting pair: both diagonal.
    let d1 = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0, 3.0]));
    let d2 = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.3, 4.0]));
    for alpha in [0.0, 0.25, 0.5, 0.9] {
        let s = lieb_sides(&d1, &d2, alpha).unwrap();
        assert!((s.lhs - s.rhs).abs() < 1e-12 * s.scale, "{alpha}");
    }
}

#[test]
fn deterministic_suite_is_clean() {
    for n in [2, 5] {
        for kind in EnsembleKind::defaults(n) {
            let e = MatrixEnsemble::new(kind, n, 77).unwrap();
            let rows = deterministic_suite(&e, 100).unwrap();
            assert_eq!(rows.len(), 6);
            assert!(rows.iter().all(IneqTrialReport::passed), "{kind}: {rows:?}");
            assert!(rows.iter().all(|r| r.trials == 100));
        }
    }
}

#[test]
fn trabs_examples() {
    let g = MatrixEnsemble::new(EnsembleKind::SymmetricGoe, 4, 1).unwrap();
    let p = MatrixEnsemble::new(EnsembleKind::PsdWishart, 4, 1).unwrap();
    let mut rng = stream(1, 0);
    let (s1, s2, s3) = (g.draw(&mut rng), g.draw(&mut rng), g.draw(&mut rng));
    let (p1, p2, p3) = (p.draw(&mut rng), p.draw(&mut rng), p.draw(&mut rng));

    let psd = trabs_comparison(&spec(Family::ShiftedExpProd, 4), &p1, &p2, &p3, 20_000, 2).unwrap();
    assert!((psd.lhs - psd.rhs).abs() < 1e-9 * psd.rhs.abs().max(1.0));

    let gauss = trabs_comparison(&spec(Family::Gaussian, 4), &s1, &s2, &s3, 100_000, 3).unwrap();
    assert!(gauss.lhs.abs() < 4.0 * gauss.diff.std_error.max(1e-3) + 0.2);
    assert!(!gauss.ci_violated());

    let r = check_trabs(&spec(Family::ShiftedExpProd, 4), &s1, &s2, &s3, 20_000, 4).unwrap();
    assert!(r.passed());
    assert!(check_trabs(&spec(Family::Cube, 4), &Mat::zeros(3, 3), &s2, &s3, 10, 0).is_err());
}

#[test]
fn positivity_for_psd_triples() {
    let p = MatrixEnsemble::new(EnsembleKind::LowRank(2), 4, 8).unwrap();
    for k in 0..20 {
        let mut rng = p.trial_rng("pos", k);
        let (a, b, c) = (p.draw(&mut rng), p.draw(&mut rng), p.draw(&mut rng));
        let r =
            check_psd_positivity(&spec(Family::ShiftedExpProd, 4), &a, &b, &c, 5000, k).unwrap();
        assert!(r.passed());
    }
}

#[test]
fn tinq_item_one_examples() {
    let params = TinqParams::default();
    let s4 = spec(Family::ShiftedExpProd, 4);
    let eye = Mat::identity(4, 4);
    let c = tinq_comparison(&s4, 1, &eye, &eye, 20_000, 5, &params).unwrap();
    assert_eq!(c.lhs, c.rhs);

    // n = 1: T(a, 1, 1) = a · E(x y)³ = 4a exactly in expectation, and the
    // rhs is the same pair sum scaled by |a|.
    let s1 = spec(Family::ShiftedExpProd, 1);
    let a = Mat::from_element(1, 1, 2.5);
    let c = tinq_comparison(&s1, 1, &a, &Mat::identity(1, 1), 400_000, 6, &params).unwrap();
    assert!((c.lhs - c.rhs).abs() < 1e-12 * c.rhs.abs());
    let t = tensor_t(
        &s1,
        &a,
        &Mat::identity(1, 1),
        &Mat::identity(1, 1),
        400_000,
        6,
    )
    .unwrap();
    assert!(t.within(10.0, 4.0), "{t:?}");
}

#[test]
fn tinq_item_five_cauchy_schwarz() {
    let s4 = spec(Family::ShiftedExpProd, 4);
    let g = MatrixEnsemble::new(EnsembleKind::SymmetricGoe, 4, 9).unwrap();
    let mut rng = stream(9, 0);
    let a = g.draw(&mut rng);
    let params = TinqParams {
        s: 2.0,
        ..TinqParams::default()
    };
    let r = check_tinq(&s4, 5, &a, &a, 20_000, 10, &params).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!(check_tinq(&s4, 6, &a, &a, 100, 10, &params).is_err());
}

#[test]
fn liebtr_examples() {
    let p = MatrixEnsemble::new(EnsembleKind::PsdWishart, 4, 12).unwrap();
    let mut rng = stream(12, 0);
    let (a, c) = (p.draw(&mut rng), p.draw(&mut rng));
    let eye = Mat::identity(4, 4);
    let s4 = spec(Family::ShiftedExpProd, 4);
    let cmp = liebtr_comparison(&s4, &a, &eye, &c, 1.0, 20_000, 13).unwrap();
    assert!((cmp.lhs - cmp.rhs).abs() < 1e-9 * cmp.rhs.abs().max(1.0));

    let b = p.draw(&mut rng);
    let r = check_liebtr_tensor(&s4, &a, &b, &c, 0.5, 20_000, 14).unwrap();
    assert!(r.passed());
    let g = check_liebtr_tensor(&spec(Family::Gaussian, 4), &a, &b, &c, 0.5, 20_000, 15).unwrap();
    assert!(g.passed());
    let not_psd = -Mat::identity(4, 4);
    assert!(check_liebtr_tensor(&s4, &a, &b, &not_psd, 0.5, 100, 1).is_err());
}

#[test]
fn ensemble_rank_is_validated() {
    assert!(MatrixEnsemble::new(EnsembleKind::LowRank(5), 4, 0).is_err());
    assert!(MatrixEnsemble::new(EnsembleKind::Projection(0), 4, 0).is_err());
    assert_eq!(
        "low_rank:3".parse::<EnsembleKind>().unwrap(),
        EnsembleKind::LowRank(3)
    );
    assert!("low_rank".parse::<EnsembleKind>().is_err());
}
