//! C interface to `lognls`.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free`. Every fallible call returns an [`LnsStatus`]; on failure
//! [`lns_last_error`] describes what went wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lognls::classical::{crossing_measure, integrate_flow, Trajectory};
use lognls::config::RunError;
use lognls::gaussian::GaussianClosure;
use lognls::potentials::{PotentialKind, PotentialSpec};
use lognls::runner::run_path;
use lognls::Error;
use num_complex::Complex64;

/// Result of a call. The nonzero codes follow the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LnsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed input: JSON, UTF-8, or a config that fails its schema.
    InvalidArgument = 2,
    /// Well-formed input outside the admissible range.
    Physical = 3,
    /// The numerics aborted (resolution, mass drift, width underflow).
    Solver = 4,
    Io = 5,
    Panic = 6,
}

pub struct LnsPotential(PotentialSpec);

pub struct LnsTrajectory(Trajectory);

pub struct LnsClosure(GaussianClosure);

struct Failure(LnsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) | Error::Format(_) | Error::Json(_) => LnsStatus::InvalidArgument,
            Error::InvalidGrid(_) | Error::GridMismatch(_) | Error::InvalidParameter(_) => LnsStatus::Physical,
            Error::Io(_) => LnsStatus::Io,
            _ => LnsStatus::Solver,
        };
        Failure(status, e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let status = match e.exit_code() {
            2 => LnsStatus::InvalidArgument,
            3 => LnsStatus::Physical,
            _ => LnsStatus::Solver,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> LnsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LnsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            LnsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LnsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(LnsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn check_dim(expected: usize, got: usize) -> Result<(), Failure> {
    if expected != got {
        return Err(Failure(LnsStatus::Physical, format!("dimension {got} given, {expected} expected")));
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn lns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Builds a potential from JSON such as `{"kind": "harmonic", "omega": [1.0]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lns_potential_from_json(json: *const c_char, out: *mut *mut LnsPotential) -> LnsStatus {
    guard(|| {
        let text = string(json, "json")?;
        let kind: PotentialKind =
            serde_json::from_str(text).map_err(|e| Failure(LnsStatus::InvalidArgument, e.to_string()))?;
        let spec = PotentialSpec::new(kind)?;
        write(out, Box::into_raw(Box::new(LnsPotential(spec))), "out")
    })
}

/// Spatial dimension, or 0 for a null handle.
///
/// # Safety
/// `potential` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lns_potential_dim(potential: *const LnsPotential) -> usize {
    potential.as_ref().map_or(0, |p| p.0.dim())
}

/// `V(x)` for `x` of length `dim`.
///
/// # Safety
/// `x` must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_potential_value(
    potential: *const LnsPotential,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> LnsStatus {
    guard(|| {
        let p = deref(potential, "potential")?;
        check_dim(p.0.dim(), dim)?;
        write(out, p.0.value(slice(x, dim, "x")?), "out")
    })
}

/// # Safety
/// `potential` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lns_potential_free(potential: *mut LnsPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// Integrates the classical flow from `(q0, p0)` up to `horizon`.
///
/// # Safety
/// `q0` and `p0` must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_trajectory_integrate(
    potential: *const LnsPotential,
    q0: *const f64,
    p0: *const f64,
    dim: usize,
    horizon: f64,
    dt: f64,
    out: *mut *mut LnsTrajectory,
) -> LnsStatus {
    guard(|| {
        let p = deref(potential, "potential")?;
        check_dim(p.0.dim(), dim)?;
        let traj = integrate_flow(&p.0, slice(q0, dim, "q0")?, slice(p0, dim, "p0")?, horizon, dt)?;
        write(out, Box::into_raw(Box::new(LnsTrajectory(traj))), "out")
    })
}

/// Number of stored samples, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lns_trajectory_len(traj: *const LnsTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

/// Position, momentum and action at time `t`. Any of the outputs may be null.
///
/// # Safety
/// Non-null `q` and `p` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn lns_trajectory_state(
    traj: *const LnsTrajectory,
    t: f64,
    q: *mut f64,
    p: *mut f64,
    dim: usize,
    action: *mut f64,
) -> LnsStatus {
    guard(|| {
        let tr = deref(traj, "traj")?;
        check_dim(tr.0.dim(), dim)?;
        if !(0.0..=tr.0.horizon()).contains(&t) {
            return Err(Failure(LnsStatus::Physical, format!("t = {t} outside [0, {}]", tr.0.horizon())));
        }
        let st = tr.0.state_at(t);
        if !q.is_null() {
            slice_mut(q, dim, "q")?.copy_from_slice(&st.q);
        }
        if !p.is_null() {
            slice_mut(p, dim, "p")?.copy_from_slice(&st.p);
        }
        if !action.is_null() {
            action.write(st.action);
        }
        Ok(())
    })
}

/// Largest relative energy drift along the trajectory.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_trajectory_energy_drift(traj: *const LnsTrajectory, out: *mut f64) -> LnsStatus {
    guard(|| write(out, deref(traj, "traj")?.0.max_energy_drift(), "out"))
}

/// Time the two trajectories spend within `threshold` of each other.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_crossing_measure(
    a: *const LnsTrajectory,
    b: *const LnsTrajectory,
    threshold: f64,
    out: *mut f64,
) -> LnsStatus {
    guard(|| {
        let m = crossing_measure(&deref(a, "a")?.0, &deref(b, "b")?.0, threshold)?;
        write(out, m, "out")
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lns_trajectory_free(traj: *mut LnsTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Gaussian closure along `traj` for the initial envelope
/// `b0 exp(-1/2 sum_j a0_j y_j^2)` and coupling `lambda`.
///
/// # Safety
/// `a0_re` and `a0_im` must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_closure_along(
    traj: *const LnsTrajectory,
    a0_re: *const f64,
    a0_im: *const f64,
    dim: usize,
    b0_re: f64,
    b0_im: f64,
    lambda: f64,
    out: *mut *mut LnsClosure,
) -> LnsStatus {
    guard(|| {
        let tr = deref(traj, "traj")?;
        let a0: Vec<Complex64> = slice(a0_re, dim, "a0_re")?
            .iter()
            .zip(slice(a0_im, dim, "a0_im")?)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        let closure = GaussianClosure::along(&tr.0, &a0, Complex64::new(b0_re, b0_im), lambda)?;
        write(out, Box::into_raw(Box::new(LnsClosure(closure))), "out")
    })
}

/// Envelope value at `(t, y)`.
///
/// # Safety
/// `y` must hold `dim` values; `re` and `im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_closure_value(
    closure: *const LnsClosure,
    t: f64,
    y: *const f64,
    dim: usize,
    re: *mut f64,
    im: *mut f64,
) -> LnsStatus {
    guard(|| {
        let c = deref(closure, "closure")?;
        check_dim(c.0.dims(), dim)?;
        if !(0.0..=c.0.horizon()).contains(&t) {
            return Err(Failure(LnsStatus::Physical, format!("t = {t} outside [0, {}]", c.0.horizon())));
        }
        let z = c.0.value_at(&c.0.state_at(t), slice(y, dim, "y")?);
        write(re, z.re, "re")?;
        write(im, z.im, "im")
    })
}

/// `||y^beta u(t)||` in closed form.
///
/// # Safety
/// `beta` must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_closure_l2_moment(
    closure: *const LnsClosure,
    t: f64,
    beta: *const usize,
    dim: usize,
    out: *mut f64,
) -> LnsStatus {
    guard(|| {
        let c = deref(closure, "closure")?;
        write(out, c.0.l2_moment(t, slice(beta, dim, "beta")?)?, "out")
    })
}

/// Largest residual of the width equation over the stored samples.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lns_closure_ode_residual(closure: *const LnsClosure, out: *mut f64) -> LnsStatus {
    guard(|| write(out, deref(closure, "closure")?.0.ode_residual(), "out"))
}

/// # Safety
/// `closure` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lns_closure_free(closure: *mut LnsClosure) {
    if !closure.is_null() {
        drop(Box::from_raw(closure));
    }
}

/// Runs a config file as `lognls run` would. `output_root` may be null, in
/// which case relative outputs resolve against the working directory.
///
/// # Safety
/// Non-null arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lns_run_config(config_path: *const c_char, output_root: *const c_char) -> LnsStatus {
    guard(|| {
        let path = string(config_path, "config_path")?;
        let root = if output_root.is_null() { None } else { Some(Path::new(string(output_root, "output_root")?)) };
        run_path(Path::new(path), root)?;
        Ok(())
    })
}
