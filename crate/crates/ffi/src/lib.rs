//! C ABI over `lclab`.
//!
//! Every fallible call returns an [`LclabStatus`]; on failure a message is
//! available from [`lclab_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`/producer functions and released with the
//! matching `*_free`. Matrices cross the boundary as row-major `n × n`
//! arrays of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use lclab::linalg::Mat;
use lclab::localization::{self, LocalizationState};
use lclab::metrics::{self, Empirical1D};
use lclab::{moments, tensorcheck, DistributionSpec, Error, Estimate, SampleMatrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LclabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownFamily = 3,
    DimensionMismatch = 4,
    NotSymmetric = 5,
    NotPsd = 6,
    EmptySample = 7,
    Degenerate = 8,
    Config = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for LclabStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::UnknownFamily(_) => LclabStatus::UnknownFamily,
            Error::ZeroDimension | Error::InvalidArgument(_) => LclabStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => LclabStatus::DimensionMismatch,
            Error::NotSymmetric(_) => LclabStatus::NotSymmetric,
            Error::NotPsd(_) => LclabStatus::NotPsd,
            Error::EmptySample => LclabStatus::EmptySample,
            Error::Degenerate { .. } => LclabStatus::Degenerate,
            Error::Config(_) => LclabStatus::Config,
            Error::Io(_) => LclabStatus::Io,
        }
    }
}

/// Monte-Carlo estimate with its batch-means standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LclabEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl From<Estimate> for LclabEstimate {
    fn from(e: Estimate) -> Self {
        LclabEstimate {
            value: e.value,
            std_error: e.std_error,
            n_samples: e.n_samples as u64,
            seed: e.seed,
        }
    }
}

/// Opaque distribution handle.
pub struct LclabDistribution(DistributionSpec);

/// Opaque sample-matrix handle (rows are draws).
pub struct LclabSample(SampleMatrix);

/// Opaque localization-state handle.
pub struct LclabLocalization(LocalizationState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(LclabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(LclabStatus::from(&e), e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(LclabStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, record any error or panic, and map it to a status code.
fn guard(f: impl FnOnce() -> Outcome) -> LclabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LclabStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            LclabStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn matrix(p: *const f64, n: usize, what: &str) -> Result<Mat, Failure> {
    let data = input(p, n * n, what)?;
    Ok(Mat::from_row_slice(n, n, data))
}

fn check_len(expected: usize, got: usize) -> Outcome {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lclab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lclab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a distribution by family name (`gaussian`, `cube`, `ball`,
/// `laplace_prod`, `shifted_exp_prod`).
///
/// # Safety
/// `family` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_distribution_new(
    family: *const c_char,
    dim: usize,
    out: *mut *mut LclabDistribution,
) -> LclabStatus {
    guard(|| {
        if family.is_null() {
            return Err(null("family"));
        }
        let name = CStr::from_ptr(family)
            .to_str()
            .map_err(|_| Failure(LclabStatus::InvalidArgument, "family is not UTF-8".into()))?;
        let spec = lclab::make_distribution(name, dim)?;
        write(out, Box::into_raw(Box::new(LclabDistribution(spec))), "out")
    })
}

/// # Safety
/// `dist` must come from [`lclab_distribution_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_distribution_free(dist: *mut LclabDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Dimension of the distribution, 0 for NULL.
///
/// # Safety
/// `dist` must be a valid handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_distribution_dim(dist: *const LclabDistribution) -> usize {
    dist.as_ref().map_or(0, |d| d.0.dim())
}

/// Unnormalised log-density at `point` (length `len`).
///
/// # Safety
/// `point` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_distribution_log_density(
    dist: *const LclabDistribution,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> LclabStatus {
    guard(|| {
        let d = borrow(dist, "dist")?;
        let v = d.0.log_density(input(point, len, "point")?)?;
        write(out, v, "out")
    })
}

/// Draw `count` samples.
///
/// # Safety
/// `dist` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_sample_new(
    dist: *const LclabDistribution,
    count: usize,
    seed: u64,
    out: *mut *mut LclabSample,
) -> LclabStatus {
    guard(|| {
        let d = borrow(dist, "dist")?;
        let s = lclab::sample(&d.0, count, seed)?;
        write(out, Box::into_raw(Box::new(LclabSample(s))), "out")
    })
}

/// # Safety
/// `sample` must come from [`lclab_sample_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_sample_free(sample: *mut LclabSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// # Safety
/// `sample` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_sample_rows(sample: *const LclabSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.rows())
}

/// # Safety
/// `sample` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_sample_cols(sample: *const LclabSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.cols())
}

/// Copy the row-major data into `buf`, which must hold exactly
/// `rows · cols` doubles.
///
/// # Safety
/// `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lclab_sample_copy(
    sample: *const LclabSample,
    buf: *mut f64,
    len: usize,
) -> LclabStatus {
    guard(|| {
        let s = borrow(sample, "sample")?;
        let data = s.0.data();
        check_len(data.len(), len)?;
        output(buf, len, "buf")?.copy_from_slice(data);
        Ok(())
    })
}

/// Relative deviation between the two forms of the pair V-statistic
/// `T̂(A, B, I)` on this sample. `a`, `b` are symmetric `cols × cols`.
///
/// # Safety
/// `a`, `b` must hold `cols²` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_tequ_deviation(
    sample: *const LclabSample,
    a: *const f64,
    b: *const f64,
    out: *mut f64,
) -> LclabStatus {
    guard(|| {
        let s = borrow(sample, "sample")?;
        let n = s.0.cols();
        let sides = tensorcheck::tequ_sides(&s.0, &matrix(a, n, "a")?, &matrix(b, n, "b")?)?;
        write(out, sides.relative_deviation(), "out")
    })
}

/// `E⟨x,y⟩³` with `x ~ p`, `y ~ q` independent.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_third_moment(
    p: *const LclabDistribution,
    q: *const LclabDistribution,
    pairs: usize,
    seed: u64,
    out: *mut LclabEstimate,
) -> LclabStatus {
    guard(|| {
        let e = moments::third_moment_inner(&borrow(p, "p")?.0, &borrow(q, "q")?.0, pairs, seed)?;
        write(out, e.into(), "out")
    })
}

/// `T(A, B, C) = E[(xᵀAy)(xᵀBy)(xᵀCy)]` over independent pairs.
///
/// # Safety
/// `a`, `b`, `c` must hold `n²` doubles with `n` the dimension.
#[no_mangle]
pub unsafe extern "C" fn lclab_tensor_t(
    dist: *const LclabDistribution,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    pairs: usize,
    seed: u64,
    out: *mut LclabEstimate,
) -> LclabStatus {
    guard(|| {
        let d = borrow(dist, "dist")?;
        let n = d.0.dim();
        let e = moments::tensor_t(
            &d.0,
            &matrix(a, n, "a")?,
            &matrix(b, n, "b")?,
            &matrix(c, n, "c")?,
            pairs,
            seed,
        )?;
        write(out, e.into(), "out")
    })
}

/// `E(‖x‖ − √n)²`.
///
/// # Safety
/// `dist` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_thin_shell(
    dist: *const LclabDistribution,
    samples: usize,
    seed: u64,
    out: *mut LclabEstimate,
) -> LclabStatus {
    guard(|| {
        let e = moments::thin_shell(&borrow(dist, "dist")?.0, samples, seed)?;
        write(out, e.into(), "out")
    })
}

/// Halfspace Cheeger proxy over `directions` random directions.
///
/// # Safety
/// `dist` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_halfspace_cheeger(
    dist: *const LclabDistribution,
    directions: usize,
    samples: usize,
    seed: u64,
    out: *mut f64,
) -> LclabStatus {
    guard(|| {
        let e = moments::halfspace_cheeger(&borrow(dist, "dist")?.0, directions, samples, seed)?;
        write(out, e.value, "out")
    })
}

/// Empirical `W_p` between two scalar samples.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` doubles.
#[no_mangle]
pub unsafe extern "C" fn lclab_wasserstein(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    p: f64,
    out: *mut f64,
) -> LclabStatus {
    guard(|| {
        let ea = Empirical1D::new(input(a, na, "a")?.to_vec())?;
        let eb = Empirical1D::new(input(b, nb, "b")?.to_vec())?;
        write(out, metrics::w_p_empirical(&ea, &eb, p)?, "out")
    })
}

/// Weighted particle cloud of `particles` draws from `dist`.
///
/// # Safety
/// `dist` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_new(
    dist: *const LclabDistribution,
    particles: usize,
    seed: u64,
    out: *mut *mut LclabLocalization,
) -> LclabStatus {
    guard(|| {
        let s = LocalizationState::init_cloud(&borrow(dist, "dist")?.0, particles, seed)?;
        write(out, Box::into_raw(Box::new(LclabLocalization(s))), "out")
    })
}

/// Closed-form state for a standard Gaussian in dimension `dim`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_new_gaussian(
    dim: usize,
    out: *mut *mut LclabLocalization,
) -> LclabStatus {
    guard(|| {
        let s = LocalizationState::gaussian(dim)?;
        write(out, Box::into_raw(Box::new(LclabLocalization(s))), "out")
    })
}

/// # Safety
/// `state` must come from a localization constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_free(state: *mut LclabLocalization) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Halt threshold as a fraction of the particle count.
///
/// # Safety
/// `state` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_set_ess_fraction(
    state: *mut LclabLocalization,
    fraction: f64,
) -> LclabStatus {
    guard(|| {
        if !(0.0..1.0).contains(&fraction) {
            return Err(
                Error::InvalidArgument(format!("fraction {fraction} outside [0, 1)")).into(),
            );
        }
        borrow_mut(state, "state")?.0.set_ess_fraction(fraction);
        Ok(())
    })
}

/// Advance by `dt` with the Brownian increment `dw` (length = dimension).
/// Returns `Degenerate` when the effective sample size falls below the
/// floor; the state is still updated.
///
/// # Safety
/// `dw` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_step(
    state: *mut LclabLocalization,
    dt: f64,
    dw: *const f64,
    len: usize,
) -> LclabStatus {
    guard(|| {
        let s = borrow_mut(state, "state")?;
        check_len(s.0.dim(), len)?;
        s.0.step_with_increment(dt, input(dw, len, "dw")?)?;
        Ok(())
    })
}

/// Current time, NaN for NULL.
///
/// # Safety
/// `state` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_time(state: *const LclabLocalization) -> f64 {
    state.as_ref().map_or(f64::NAN, |s| s.0.t())
}

/// Effective sample size, NaN for NULL.
///
/// # Safety
/// `state` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_ess(state: *const LclabLocalization) -> f64 {
    state.as_ref().map_or(f64::NAN, |s| s.0.ess())
}

/// Copy the tilted mean into `buf` (length = dimension).
///
/// # Safety
/// `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_mean(
    state: *const LclabLocalization,
    buf: *mut f64,
    len: usize,
) -> LclabStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        check_len(s.0.dim(), len)?;
        output(buf, len, "buf")?.copy_from_slice(s.0.mu());
        Ok(())
    })
}

/// Copy the tilted covariance, row-major, into `buf` (length `n²`).
///
/// # Safety
/// `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_covariance(
    state: *const LclabLocalization,
    buf: *mut f64,
    len: usize,
) -> LclabStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        let n = s.0.dim();
        check_len(n * n, len)?;
        let dst = output(buf, len, "buf")?;
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = s.0.cov()[(i, j)];
            }
        }
        Ok(())
    })
}

/// `Tr((A − I)^q)` of the current covariance, `q` even.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lclab_localization_potential(
    state: *const LclabLocalization,
    q: u32,
    out: *mut f64,
) -> LclabStatus {
    guard(|| {
        if q == 0 || !q.is_multiple_of(2) {
            return Err(
                Error::InvalidArgument(format!("q = {q} must be even and positive")).into(),
            );
        }
        let s = borrow(state, "state")?;
        write(out, localization::potential(s.0.cov(), q), "out")
    })
}
