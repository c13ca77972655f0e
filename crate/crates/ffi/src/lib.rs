//! C ABI for `shelab`.
//!
//! Every fallible function returns a [`ShelabStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be copied out with [`shelab_last_error_message`]. Models are opaque
//! handles created by `shelab_model_new_*` and released by
//! [`shelab_model_free`].
//!
//! The header `include/shelab.h` is generated by the build script.

use shelab::density::{self, SampleSet};
use shelab::kernels::{self, BoundaryCondition, KernelParams, KernelPoint};
use shelab::scheme::{self, Drift, InitialDatum, ModeTail, ModelSpec, NamedDrift, SchemeConfig};
use shelab::{spectral, Error};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result codes. `SHELAB_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShelabStatus {
    Ok = 0,
    Domain = 1,
    Truncation = 2,
    Aliasing = 3,
    Dimension = 4,
    Evaluation = 5,
    Hypothesis = 6,
    Inconclusive = 7,
    Config = 8,
    Io = 9,
    /// A required pointer argument was null.
    NullPointer = 10,
    /// The library panicked; the message holds the payload.
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShelabBoundary {
    Neumann = 0,
    Dirichlet = 1,
}

impl From<ShelabBoundary> for BoundaryCondition {
    fn from(b: ShelabBoundary) -> Self {
        match b {
            ShelabBoundary::Neumann => BoundaryCondition::Neumann,
            ShelabBoundary::Dirichlet => BoundaryCondition::Dirichlet,
        }
    }
}

/// Time discretisation. Obtain defaults from [`shelab_scheme_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShelabScheme {
    pub horizon: f64,
    pub steps: usize,
    pub max_mode: usize,
    /// Collocation points, at least `2 * max_mode + 2`.
    pub grid: usize,
    /// The reference path uses `steps * 2^ref_refinement` steps.
    pub ref_refinement: u32,
    pub strict: bool,
}

impl From<ShelabScheme> for SchemeConfig {
    fn from(s: ShelabScheme) -> Self {
        SchemeConfig {
            horizon: s.horizon,
            steps: s.steps,
            max_mode: s.max_mode,
            grid: s.grid,
            ref_refinement: s.ref_refinement,
            strict: s.strict,
        }
    }
}

/// Mean and variance of a normal law.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShelabGaussian {
    pub mean: f64,
    pub variance: f64,
}

/// Opaque model handle.
pub struct ShelabModel {
    inner: ModelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> ShelabStatus {
    match e {
        Error::Domain(_) => ShelabStatus::Domain,
        Error::Truncation { .. } => ShelabStatus::Truncation,
        Error::Aliasing { .. } => ShelabStatus::Aliasing,
        Error::Dimension { .. } => ShelabStatus::Dimension,
        Error::Evaluation { .. } => ShelabStatus::Evaluation,
        Error::Hypothesis(_) => ShelabStatus::Hypothesis,
        Error::Inconclusive(_) => ShelabStatus::Inconclusive,
        Error::Config(_) | Error::Json(_) => ShelabStatus::Config,
        Error::Io(_) => ShelabStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, records any error and converts it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ShelabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ShelabStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            ShelabStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ShelabStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or(Failure::Null(what))
}

unsafe fn in_ref<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or(Failure::Null(what))
}

unsafe fn in_slice<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_slice<'a, T>(ptr: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shelab_version() -> *const c_char {
    const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Copies the last error message of the calling thread into `buf`
/// (truncated, always NUL-terminated when `len > 0`). Returns the full
/// message length without the terminator, or 0 if there is none.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn shelab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Green function `G_t(x, y)` at the default accuracy.
///
/// # Safety
/// `out` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn shelab_green_eval(bc: ShelabBoundary, t: f64, x: f64, y: f64, out: *mut f64) -> ShelabStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = kernels::green_eval(bc.into(), KernelPoint::new(t, x, y)?, &KernelParams::default())?;
        Ok(())
    })
}

/// `∫_0^1 G_t(x, y)² dy`.
///
/// # Safety
/// `out` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn shelab_green_sq_integral(bc: ShelabBoundary, t: f64, x: f64, out: *mut f64) -> ShelabStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = kernels::green_sq_integral(bc.into(), t, x, &KernelParams::default())?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn shelab_scheme_default() -> ShelabScheme {
    let d = SchemeConfig::default();
    ShelabScheme {
        horizon: d.horizon,
        steps: d.steps,
        max_mode: d.max_mode,
        grid: d.grid,
        ref_refinement: d.ref_refinement,
        strict: d.strict,
    }
}

unsafe fn new_model(out: *mut *mut ShelabModel, build: impl FnOnce() -> shelab::Result<ModelSpec>) -> ShelabStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let model = build()?;
        *out = Box::into_raw(Box::new(ShelabModel { inner: model }));
        Ok(())
    })
}

/// Model with drift `slope * u + offset` and constant initial datum `u0`.
///
/// # Safety
/// `out` must point to a writable handle slot. The handle must be released
/// with [`shelab_model_free`].
#[no_mangle]
pub unsafe extern "C" fn shelab_model_new_affine(
    bc: ShelabBoundary,
    slope: f64,
    offset: f64,
    sigma: f64,
    u0: f64,
    out: *mut *mut ShelabModel,
) -> ShelabStatus {
    new_model(out, || ModelSpec::new(Drift::Affine { slope, offset }, sigma, InitialDatum::constant(u0), bc.into()))
}

/// Model with drift `scale * sin(u)` and constant initial datum `u0`.
///
/// # Safety
/// As for [`shelab_model_new_affine`].
#[no_mangle]
pub unsafe extern "C" fn shelab_model_new_sine(
    bc: ShelabBoundary,
    scale: f64,
    sigma: f64,
    u0: f64,
    out: *mut *mut ShelabModel,
) -> ShelabStatus {
    new_model(out, || {
        ModelSpec::new(Drift::Named(NamedDrift::sine(scale)), sigma, InitialDatum::constant(u0), bc.into())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from a `shelab_model_new_*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn shelab_model_free(model: *mut ShelabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn simulate_into(
    model: *const ShelabModel,
    scheme: *const ShelabScheme,
    out: *mut f64,
    out_len: usize,
    run: impl FnOnce(&ModelSpec, &SchemeConfig) -> shelab::Result<spectral::GridFunction>,
) -> ShelabStatus {
    guard(|| {
        let model = &in_ref(model, "model")?.inner;
        let config: SchemeConfig = (*in_ref(scheme, "scheme")?).into();
        if out_len != config.grid {
            return Err(Error::Dimension { expected: config.grid, got: out_len }.into());
        }
        let out = out_slice(out, out_len, "out")?;
        out.copy_from_slice(run(model, &config)?.values());
        Ok(())
    })
}

/// Terminal state `u^δ(T, x_j)` of path `path` on the `scheme->grid`
/// midpoints `x_j = (j + 1/2)/grid`.
///
/// # Safety
/// `model` and `scheme` must be valid; `out` must hold `out_len` doubles and
/// `out_len` must equal `scheme->grid`.
#[no_mangle]
pub unsafe extern "C" fn shelab_simulate_path(
    model: *const ShelabModel,
    scheme: *const ShelabScheme,
    seed: u64,
    path: u64,
    out: *mut f64,
    out_len: usize,
) -> ShelabStatus {
    simulate_into(model, scheme, out, out_len, |m, c| scheme::simulate_path(m, c, seed, path))
}

/// The coupled reference state of the same path, as for
/// [`shelab_simulate_path`].
///
/// # Safety
/// As for [`shelab_simulate_path`].
#[no_mangle]
pub unsafe extern "C" fn shelab_simulate_reference(
    model: *const ShelabModel,
    scheme: *const ShelabScheme,
    seed: u64,
    path: u64,
    out: *mut f64,
    out_len: usize,
) -> ShelabStatus {
    simulate_into(model, scheme, out, out_len, |m, c| scheme::simulate_reference(m, c, seed, path))
}

fn tail(continuum: bool) -> ModeTail {
    if continuum {
        ModeTail::Continuum
    } else {
        ModeTail::Truncated
    }
}

/// Exact law of `u(T, x)` for an affine model, from modes `≤ max_mode`
/// plus, if `continuum_tail`, the stationary variance of the rest.
///
/// # Safety
/// `model` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shelab_affine_exact_law(
    model: *const ShelabModel,
    horizon: f64,
    x: f64,
    max_mode: usize,
    continuum_tail: bool,
    out: *mut ShelabGaussian,
) -> ShelabStatus {
    guard(|| {
        let model = &in_ref(model, "model")?.inner;
        let out = out_ref(out, "out")?;
        let law = scheme::affine_exact_law(model, horizon, x, max_mode, tail(continuum_tail))?;
        *out = ShelabGaussian { mean: law.mean, variance: law.variance };
        Ok(())
    })
}

/// Law of the scheme's terminal value `u^δ(T, x)` for an affine model.
///
/// # Safety
/// `model` and `scheme` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shelab_affine_perturbed_law(
    model: *const ShelabModel,
    scheme: *const ShelabScheme,
    x: f64,
    continuum_tail: bool,
    out: *mut ShelabGaussian,
) -> ShelabStatus {
    guard(|| {
        let model = &in_ref(model, "model")?.inner;
        let config: SchemeConfig = (*in_ref(scheme, "scheme")?).into();
        let out = out_ref(out, "out")?;
        config.validate(model)?;
        let law = scheme::affine_perturbed_law(model, &config, x, tail(continuum_tail))?;
        *out = ShelabGaussian { mean: law.mean, variance: law.variance };
        Ok(())
    })
}

/// Default KDE variance parameter for `n` samples.
#[no_mangle]
pub extern "C" fn shelab_bandwidth(n: usize) -> f64 {
    density::bandwidth(n)
}

/// Gaussian kernel density estimate with variance `zeta` on a strictly
/// increasing grid of `grid_len` points, written to `out`.
///
/// # Safety
/// `samples` must hold `n` doubles, `grid` and `out` `grid_len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn shelab_kde(
    samples: *const f64,
    n: usize,
    zeta: f64,
    grid: *const f64,
    grid_len: usize,
    out: *mut f64,
) -> ShelabStatus {
    guard(|| {
        let xs = in_slice(samples, n, "samples")?;
        let z = in_slice(grid, grid_len, "grid")?;
        let out = out_slice(out, grid_len, "out")?;
        let set = SampleSet::new(xs.to_vec(), 0, "")?;
        let est = density::kde(&set, zeta, z)?;
        out.copy_from_slice(est.values());
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        LAST_ERROR.with(|e| e.borrow().as_ref().map(|c| c.to_string_lossy().into_owned()).unwrap_or_default())
    }

    #[test]
    fn errors_map_to_their_status() {
        assert_eq!(status_of(&Error::Domain("x".into())), ShelabStatus::Domain);
        assert_eq!(
            status_of(&Error::Evaluation { at: "mode index 0".into(), value: f64::NAN }),
            ShelabStatus::Evaluation
        );
        assert_eq!(status_of(&Error::Config("bad".into())), ShelabStatus::Config);
    }

    #[test]
    fn guard_records_failures() {
        assert_eq!(guard(|| Err(Failure::Null("out"))), ShelabStatus::NullPointer);
        assert_eq!(last_error(), "null pointer passed for out");
        assert_eq!(guard(|| panic!("boom")), ShelabStatus::Panic);
        assert_eq!(last_error(), "panic: boom");
        assert_eq!(guard(|| Ok(())), ShelabStatus::Ok);
    }

    #[test]
    fn interior_nul_is_replaced() {
        set_error("a\0b".into());
        assert_eq!(last_error(), "a b");
    }
}
