use std::ffi::{CStr, CString};
use std::ptr;

use lclab_ffi::*;

fn last_error() -> String {
    let p = lclab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn distribution(family: &str, dim: usize) -> *mut LclabDistribution {
    let name = CString::new(family).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { lclab_distribution_new(name.as_ptr(), dim, &mut out) };
    assert_eq!(status, LclabStatus::Ok);
    assert!(!out.is_null());
    out
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(lclab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn unknown_family_sets_code_and_message() {
    let name = CString::new("banana").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { lclab_distribution_new(name.as_ptr(), 3, &mut out) };
    assert_eq!(status, LclabStatus::UnknownFamily);
    assert!(out.is_null());
    assert!(last_error().contains("banana"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut out = ptr::null_mut();
    let status = unsafe { lclab_distribution_new(ptr::null(), 3, &mut out) };
    assert_eq!(status, LclabStatus::NullPointer);
    let mut v = 0.0;
    let status = unsafe { lclab_distribution_log_density(ptr::null(), ptr::null(), 0, &mut v) };
    assert_eq!(status, LclabStatus::NullPointer);
    assert_eq!(unsafe { lclab_distribution_dim(ptr::null()) }, 0);
    unsafe {
        lclab_distribution_free(ptr::null_mut());
        lclab_sample_free(ptr::null_mut());
        lclab_localization_free(ptr::null_mut());
    }
}

#[test]
fn log_density_matches_core() {
    let d = distribution("gaussian", 3);
    let x = [0.5, -1.0, 2.0];
    let mut v = 0.0;
    let status = unsafe { lclab_distribution_log_density(d, x.as_ptr(), 3, &mut v) };
    assert_eq!(status, LclabStatus::Ok);
    let expected = lclab::make_distribution("gaussian", 3)
        .unwrap()
        .log_density(&x)
        .unwrap();
    assert_eq!(v, expected);

    let status = unsafe { lclab_distribution_log_density(d, x.as_ptr(), 2, &mut v) };
    assert_eq!(status, LclabStatus::DimensionMismatch);
    unsafe { lclab_distribution_free(d) };
}

#[test]
fn sample_copy_is_row_major_and_reproducible() {
    let d = distribution("cube", 4);
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { lclab_sample_new(d, 100, 7, &mut s) },
        LclabStatus::Ok
    );
    let (rows, cols) = unsafe { (lclab_sample_rows(s), lclab_sample_cols(s)) };
    assert_eq!((rows, cols), (100, 4));
    let mut buf = vec![0.0; rows * cols];
    assert_eq!(
        unsafe { lclab_sample_copy(s, buf.as_mut_ptr(), buf.len()) },
        LclabStatus::Ok
    );
    let core = lclab::sample(&lclab::make_distribution("cube", 4).unwrap(), 100, 7).unwrap();
    assert_eq!(buf, core.data());
    assert_eq!(
        unsafe { lclab_sample_copy(s, buf.as_mut_ptr(), buf.len() - 1) },
        LclabStatus::DimensionMismatch
    );
    unsafe {
        lclab_sample_free(s);
        lclab_distribution_free(d);
    }
}

#[test]
fn estimates_match_core() {
    let d = distribution("shifted_exp_prod", 2);
    let mut e = LclabEstimate {
        value: 0.0,
        std_error: 0.0,
        n_samples: 0,
        seed: 0,
    };
    assert_eq!(
        unsafe { lclab_third_moment(d, d, 4096, 3, &mut e) },
        LclabStatus::Ok
    );
    let spec = lclab::make_distribution("shifted_exp_prod", 2).unwrap();
    let core = lclab::moments::third_moment_inner(&spec, &spec, 4096, 3).unwrap();
    assert_eq!(e.value, core.value);
    assert_eq!(e.std_error, core.std_error);
    assert_eq!(e.n_samples, 4096);

    let id = [1.0, 0.0, 0.0, 1.0];
    let mut t = e;
    let status =
        unsafe { lclab_tensor_t(d, id.as_ptr(), id.as_ptr(), id.as_ptr(), 4096, 3, &mut t) };
    assert_eq!(status, LclabStatus::Ok);
    assert_eq!(t.value, e.value);

    let mut shell = e;
    assert_eq!(
        unsafe { lclab_thin_shell(d, 4096, 3, &mut shell) },
        LclabStatus::Ok
    );
    assert!(shell.value > 0.0);
    unsafe { lclab_distribution_free(d) };
}

#[test]
fn tequ_deviation_is_tiny() {
    let d = distribution("laplace_prod", 3);
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { lclab_sample_new(d, 200, 11, &mut s) },
        LclabStatus::Ok
    );
    let a = [2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 0.7];
    let b = [1.0, 0.0, 0.2, 0.0, -1.0, 0.0, 0.2, 0.0, 0.5];
    let mut dev = f64::NAN;
    assert_eq!(
        unsafe { lclab_tequ_deviation(s, a.as_ptr(), b.as_ptr(), &mut dev) },
        LclabStatus::Ok
    );
    assert!(dev < 1e-10, "{dev}");

    let skew = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let status = unsafe { lclab_tequ_deviation(s, skew.as_ptr(), b.as_ptr(), &mut dev) };
    assert_eq!(status, LclabStatus::NotSymmetric);
    unsafe {
        lclab_sample_free(s);
        lclab_distribution_free(d);
    }
}

#[test]
fn wasserstein_of_unit_shift() {
    let a = [0.0, 1.0, 2.0, 3.0];
    let b = [1.0, 2.0, 3.0, 4.0];
    let mut w = 0.0;
    let status = unsafe { lclab_wasserstein(a.as_ptr(), 4, b.as_ptr(), 4, 2.0, &mut w) };
    assert_eq!(status, LclabStatus::Ok);
    assert!((w - 1.0).abs() < 1e-12);
    let status = unsafe { lclab_wasserstein(a.as_ptr(), 0, b.as_ptr(), 4, 2.0, &mut w) };
    assert_eq!(status, LclabStatus::EmptySample);
}

#[test]
fn gaussian_state_follows_conjugacy() {
    let mut st = ptr::null_mut();
    assert_eq!(
        unsafe { lclab_localization_new_gaussian(2, &mut st) },
        LclabStatus::Ok
    );
    let dw = [0.3, -0.1];
    assert_eq!(
        unsafe { lclab_localization_step(st, 1.0, dw.as_ptr(), 2) },
        LclabStatus::Ok
    );
    assert_eq!(unsafe { lclab_localization_time(st) }, 1.0);
    let mut mean = [0.0; 2];
    let mut cov = [0.0; 4];
    unsafe {
        assert_eq!(
            lclab_localization_mean(st, mean.as_mut_ptr(), 2),
            LclabStatus::Ok
        );
        assert_eq!(
            lclab_localization_covariance(st, cov.as_mut_ptr(), 4),
            LclabStatus::Ok
        );
    }
    // c = dw since μ_0 = 0, so μ_1 = dw / 2 and A_1 = I / 2.
    assert!((mean[0] - 0.15).abs() < 1e-15 && (mean[1] + 0.05).abs() < 1e-15);
    assert_eq!(cov, [0.5, 0.0, 0.0, 0.5]);
    let mut phi = 0.0;
    assert_eq!(
        unsafe { lclab_localization_potential(st, 2, &mut phi) },
        LclabStatus::Ok
    );
    assert!((phi - 0.5).abs() < 1e-15);
    assert_eq!(
        unsafe { lclab_localization_potential(st, 3, &mut phi) },
        LclabStatus::InvalidArgument
    );
    unsafe { lclab_localization_free(st) };
}

#[test]
fn particle_state_reports_degeneracy() {
    let d = distribution("gaussian", 2);
    let mut st = ptr::null_mut();
    assert_eq!(
        unsafe { lclab_localization_new(d, 10, 1, &mut st) },
        LclabStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { lclab_localization_new(d, 2000, 1, &mut st) },
        LclabStatus::Ok
    );
    assert_eq!(unsafe { lclab_localization_ess(st) }, 2000.0);
    assert_eq!(
        unsafe { lclab_localization_set_ess_fraction(st, 0.5) },
        LclabStatus::Ok
    );
    // A huge tilt concentrates all mass on a few particles.
    let dw = [40.0, 40.0];
    let status = unsafe { lclab_localization_step(st, 50.0, dw.as_ptr(), 2) };
    assert_eq!(status, LclabStatus::Degenerate);
    assert!(last_error().contains("effective sample size"));
    assert!(unsafe { lclab_localization_ess(st) } < 1000.0);
    assert_eq!(unsafe { lclab_localization_time(st) }, 50.0);
    unsafe {
        lclab_localization_free(st);
        lclab_distribution_free(d);
    }
}
