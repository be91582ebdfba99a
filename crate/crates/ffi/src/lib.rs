//! C ABI over the `powerlog` library.
//!
//! Objects are opaque handles created by `pl_*_new*` functions and released
//! with the matching `pl_*_free`. Every fallible call returns a [`PlStatus`];
//! on failure a message is available from [`pl_last_error`] on the same
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use powerlog::cocycle::{lyapunov, transfer};
use powerlog::experiment::{self, ExperimentConfig, Overrides};
use powerlog::potential::Potential;
use powerlog::quantum::{adaptive_profile, fixed_profile, moments, outside_probability, AmplitudeProfile};
use powerlog::torus::{Dynamics, Frequency, TorusPoint};
use powerlog::transport::{dt_integral, dt_outside_bound_from};
use powerlog::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    NumericPolicy = 4,
    Config = 5,
    Io = 6,
    Panic = 7,
}

/// A potential `lambda f` on the torus.
pub struct PlPotential(Potential);

/// A shift or skew-shift.
pub struct PlDynamics(Dynamics);

/// Time-averaged amplitudes `a(n, T)` on a window `-L..=L`.
pub struct PlProfile(AmplitudeProfile);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::Config { .. } => PlStatus::Config,
        Error::Io(_) => PlStatus::Io,
        Error::Precondition(_) => PlStatus::Precondition,
        e if e.is_numeric_policy() => PlStatus::NumericPolicy,
        _ => PlStatus::InvalidArgument,
    }
}

struct Fail(PlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PlStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn boxed<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    write(out, Box::into_raw(Box::new(v)), "out")
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- potentials --------------------------------------------------------------

/// `lambda * sum_j cos(2 pi x_j)` on `T^nu`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_potential_new_cosine(nu: usize, lambda: f64, out: *mut *mut PlPotential) -> PlStatus {
    guard(|| {
        if nu == 0 {
            return Err(Fail(PlStatus::InvalidArgument, "nu must be >= 1".into()));
        }
        if !lambda.is_finite() {
            return Err(Fail(PlStatus::InvalidArgument, "lambda must be finite".into()));
        }
        boxed(out, PlPotential(Potential::cos_sum(nu, lambda)))
    })
}

/// Gevrey model with coefficients `exp(-|n|^{1/sigma})` for `0 < |n| <= cutoff`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_potential_new_gevrey(
    nu: usize,
    sigma: f64,
    cutoff: u32,
    lambda: f64,
    out: *mut *mut PlPotential,
) -> PlStatus {
    guard(|| boxed(out, PlPotential(Potential::gevrey_saturated(nu, sigma, cutoff, lambda)?)))
}

/// Potential from its TOML description (`nu`, `lambda`, `kind`, `coefficients`).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_potential_from_toml(toml: *const c_char, out: *mut *mut PlPotential) -> PlStatus {
    guard(|| boxed(out, PlPotential(Potential::from_toml(str_arg(toml, "toml")?)?)))
}

/// `lambda f(x)` at a point with `dim` coordinates.
///
/// # Safety
/// `x` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_potential_eval(
    p: *const PlPotential,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> PlStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let v = p.0.eval(&TorusPoint::new(slice(x, dim, "x")?.to_vec()))?;
        write(out, v, "out")
    })
}

/// Rigorous bound on `sup |lambda f|`; NaN for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_potential_sup_norm(p: *const PlPotential) -> f64 {
    p.as_ref().map_or(f64::NAN, |p| p.0.sup_norm_bound())
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_potential_free(p: *mut PlPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// ---- dynamics ----------------------------------------------------------------

/// Shift by `omega` on `T^nu`.
///
/// # Safety
/// `omega` must point to `nu` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_dynamics_new_shift(omega: *const f64, nu: usize, out: *mut *mut PlDynamics) -> PlStatus {
    guard(|| {
        let w = slice(omega, nu, "omega")?;
        if w.is_empty() {
            return Err(Fail(PlStatus::InvalidArgument, "omega is empty".into()));
        }
        boxed(out, PlDynamics(Dynamics::shift(Frequency::unclassified(w.to_vec()))))
    })
}

/// Skew-shift with frequency `omega` on `T^dim`, `dim >= 2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_dynamics_new_skew_shift(omega: f64, dim: usize, out: *mut *mut PlDynamics) -> PlStatus {
    guard(|| boxed(out, PlDynamics(Dynamics::skew_shift(Frequency::unclassified(vec![omega]), dim)?)))
}

/// Torus dimension; 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_dynamics_dim(d: *const PlDynamics) -> usize {
    d.as_ref().map_or(0, |d| d.0.dim())
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_dynamics_free(d: *mut PlDynamics) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

// ---- cocycle -----------------------------------------------------------------

/// `ln ||A_n^{f,z}(x)||` with `z = e_re + i e_im`; negative `n` gives the left cocycle.
///
/// # Safety
/// Handles must be live and `x` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_transfer_log_norm(
    f: *const PlPotential,
    d: *const PlDynamics,
    x: *const f64,
    dim: usize,
    e_re: f64,
    e_im: f64,
    n: i64,
    out: *mut f64,
) -> PlStatus {
    guard(|| {
        let (f, d) = (deref(f, "potential")?, deref(d, "dynamics")?);
        let x = TorusPoint::new(slice(x, dim, "x")?.to_vec());
        let m = transfer(&f.0, &d.0, &x, Complex64::new(e_re, e_im), n)?;
        write(out, m.log_mag, "out")
    })
}

/// Monte Carlo `L_n(E)` over `num_phases` seeded phases.
///
/// # Safety
/// Handles must be live; `mean_out` and `stderr_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pl_lyapunov(
    f: *const PlPotential,
    d: *const PlDynamics,
    energy: f64,
    n: usize,
    num_phases: usize,
    seed: u64,
    mean_out: *mut f64,
    stderr_out: *mut f64,
) -> PlStatus {
    guard(|| {
        let (f, d) = (deref(f, "potential")?, deref(d, "dynamics")?);
        let est = lyapunov(&f.0, &d.0, Complex64::new(energy, 0.0), n, num_phases, seed)?;
        write(mean_out, est.mean, "mean_out")?;
        write(stderr_out, est.stderr, "stderr_out")
    })
}

// ---- quantum dynamics --------------------------------------------------------

/// Amplitudes at time `t` on the window `-half_width..=half_width`. The
/// profile is returned even when it leaks; check [`pl_profile_is_valid`].
///
/// # Safety
/// Handles must be live, `x` must point to `dim` doubles, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_profile_new_fixed(
    f: *const PlPotential,
    d: *const PlDynamics,
    x: *const f64,
    dim: usize,
    t: f64,
    half_width: usize,
    leak_tol: f64,
    out: *mut *mut PlProfile,
) -> PlStatus {
    guard(|| {
        let (f, d) = (deref(f, "potential")?, deref(d, "dynamics")?);
        let x = TorusPoint::new(slice(x, dim, "x")?.to_vec());
        boxed(out, PlProfile(fixed_profile(&f.0, &d.0, &x, t, half_width, leak_tol)?))
    })
}

/// Amplitudes on a window doubled until the leak is below `leak_tol`.
/// Fails with `NumericPolicy` beyond `window_cap`.
///
/// # Safety
/// As [`pl_profile_new_fixed`].
#[no_mangle]
pub unsafe extern "C" fn pl_profile_new_adaptive(
    f: *const PlPotential,
    d: *const PlDynamics,
    x: *const f64,
    dim: usize,
    t: f64,
    leak_tol: f64,
    window_cap: usize,
    out: *mut *mut PlProfile,
) -> PlStatus {
    guard(|| {
        let (f, d) = (deref(f, "potential")?, deref(d, "dynamics")?);
        let x = TorusPoint::new(slice(x, dim, "x")?.to_vec());
        boxed(out, PlProfile(adaptive_profile(&f.0, &d.0, &x, t, leak_tol, window_cap)?))
    })
}

/// Window half-width `L`; the profile has `2L + 1` entries. 0 for null.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_profile_half_width(p: *const PlProfile) -> usize {
    p.as_ref().map_or(0, |p| p.0.half_width)
}

/// 1 if the truncation leak is below tolerance, 0 otherwise or for null.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_profile_is_valid(p: *const PlProfile) -> c_int {
    p.as_ref().map_or(0, |p| p.0.is_valid() as c_int)
}

/// Copies `a(-L..=L, T)` into `buf`, which must hold `2L + 1` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_profile_amplitudes(p: *const PlProfile, buf: *mut f64, len: usize) -> PlStatus {
    guard(|| {
        let p = deref(p, "profile")?;
        let need = p.0.a.len();
        if len < need {
            return Err(Fail(PlStatus::InvalidArgument, format!("buffer holds {len}, need {need}")));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(p.0.a.as_ptr(), buf, need);
        Ok(())
    })
}

/// `<|X|^p(T)>`.
///
/// # Safety
/// `prof` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pl_profile_moment(prof: *const PlProfile, p: f64, out: *mut f64) -> PlStatus {
    guard(|| write(out, moments(&deref(prof, "profile")?.0, p)?, "out"))
}

/// Outside probability `P(N, T)`: mass on `|n| > N`.
///
/// # Safety
/// `prof` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pl_profile_outside(prof: *const PlProfile, n: usize, out: *mut f64) -> PlStatus {
    guard(|| write(out, outside_probability(&deref(prof, "profile")?.0, n)?.p, "out"))
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_profile_free(p: *mut PlProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// ---- transport ---------------------------------------------------------------

/// Logarithm of the integral criterion at time `t` with radius
/// `N = ceil(ln(t)^gamma)`, and the log of the outside-probability bound.
/// Any of the output pointers may be null.
///
/// # Safety
/// Handles must be live and `x` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_dt_integral(
    f: *const PlPotential,
    d: *const PlDynamics,
    x: *const f64,
    dim: usize,
    t: f64,
    gamma: f64,
    log_value: *mut f64,
    log_bound: *mut f64,
    n_used: *mut usize,
) -> PlStatus {
    guard(|| {
        let (f, d) = (deref(f, "potential")?, deref(d, "dynamics")?);
        let x = TorusPoint::new(slice(x, dim, "x")?.to_vec());
        if !(t >= 10.0 && gamma > 1.0) {
            return Err(Fail(PlStatus::Precondition, "need t >= 10 and gamma > 1".into()));
        }
        let integral = dt_integral(&f.0, &d.0, &x, t, gamma)?;
        let bound = dt_outside_bound_from(t, &integral);
        if !log_value.is_null() {
            log_value.write(integral.log_value);
        }
        if !log_bound.is_null() {
            log_bound.write(bound.log_bound);
        }
        if !n_used.is_null() {
            n_used.write(integral.n_used);
        }
        Ok(())
    })
}

// ---- experiments -------------------------------------------------------------

/// Runs an experiment from TOML text and writes its artifacts. `out_dir`
/// may be null to keep the configured directory. `all_pass` (may be null)
/// receives 1 when every summary check passed.
///
/// # Safety
/// `config` must be NUL-terminated; `out_dir` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pl_run_experiment(
    config: *const c_char,
    out_dir: *const c_char,
    all_pass: *mut c_int,
) -> PlStatus {
    guard(|| {
        let text = str_arg(config, "config")?;
        let ov = Overrides {
            output_dir: if out_dir.is_null() { None } else { Some(str_arg(out_dir, "out_dir")?.to_string()) },
            ..Default::default()
        };
        let cfg = ExperimentConfig::from_toml_str(text, &ov)?;
        let summary = experiment::run(&cfg)?;
        if !all_pass.is_null() {
            all_pass.write(summary.all_pass() as c_int);
        }
        Ok(())
    })
}
