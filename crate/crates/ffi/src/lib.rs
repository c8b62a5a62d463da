//! C ABI over `geobs`.
//!
//! Manifolds and observers are opaque heap handles created by `*_new` /
//! `*_from_json` and released by the matching `*_free`. Every fallible call
//! returns a [`GeobsStatus`]; on failure the message is kept per thread and
//! read with [`geobs_last_error_message`]. Points and tangent components are
//! chart coordinates of length `geobs_manifold_coord_dim`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use geobs::builtin::{make_builtin, BuiltinSpec};
use geobs::manifold::{Manifold, Point, Tangent};
use geobs::observer::{pursuit_step, velocity_from_log, ObserverState};
use geobs::scenario::{run_scenario, ScenarioConfig};
use geobs::GeoError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeobsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    OutsideDomain = 4,
    NumericalFailure = 5,
    InjectivityViolation = 6,
    Panic = 7,
}

/// Opaque manifold handle.
pub struct GeobsManifold {
    inner: Manifold,
}

/// Opaque observer handle: the observer state together with the last
/// measurement it was fed.
pub struct GeobsObserver {
    manifold: Manifold,
    state: ObserverState,
    q_last: Point,
    log_q_xi: Option<Tangent>,
    tol: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(GeobsStatus, String);

impl From<GeoError> for Failure {
    fn from(e: GeoError) -> Self {
        let status = match &e {
            GeoError::DimensionMismatch { .. } => GeobsStatus::DimensionMismatch,
            GeoError::OutsideDomain(_) | GeoError::ChartExit { .. } | GeoError::InadmissibleRegion(_) => {
                GeobsStatus::OutsideDomain
            }
            GeoError::InjectivityViolation { .. } => GeobsStatus::InjectivityViolation,
            GeoError::InvalidParameter(_) | GeoError::NonFinite(_) | GeoError::DegeneratePlane(_) => {
                GeobsStatus::InvalidArgument
            }
            _ => GeobsStatus::NumericalFailure,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GeobsStatus::NullPointer, format!("null pointer: {what}"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(GeobsStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure and converts panics to `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GeobsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GeobsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
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
            GeobsStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| invalid(format!("{what} is not UTF-8: {e}")))
}

fn check_len(m: &Manifold, len: usize) -> Result<(), Failure> {
    if len != m.coord_dim() {
        return Err(GeoError::DimensionMismatch {
            expected: m.coord_dim(),
            got: len,
        }
        .into());
    }
    Ok(())
}

fn write(dst: &mut [f64], src: &[f64]) {
    dst.copy_from_slice(src);
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn geobs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn geobs_status_str(status: GeobsStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        GeobsStatus::Ok => b"ok\0",
        GeobsStatus::NullPointer => b"null pointer\0",
        GeobsStatus::InvalidArgument => b"invalid argument\0",
        GeobsStatus::DimensionMismatch => b"dimension mismatch\0",
        GeobsStatus::OutsideDomain => b"outside domain\0",
        GeobsStatus::NumericalFailure => b"numerical failure\0",
        GeobsStatus::InjectivityViolation => b"injectivity violation\0",
        GeobsStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Build a manifold from a JSON description such as `{"kind":"sphere2"}`
/// or `{"kind":"euclidean","dim":3}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn geobs_manifold_from_json(spec_json: *const c_char, out: *mut *mut GeobsManifold) -> GeobsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: BuiltinSpec =
            serde_json::from_str(text(spec_json, "spec_json")?).map_err(|e| invalid(format!("manifold spec: {e}")))?;
        let inner = make_builtin(&spec)?;
        *out = Box::into_raw(Box::new(GeobsManifold { inner }));
        Ok(())
    })
}

/// Release a manifold. Null is ignored.
///
/// # Safety
/// `m` must come from `geobs_manifold_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geobs_manifold_free(m: *mut GeobsManifold) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Intrinsic dimension, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live manifold handle.
#[no_mangle]
pub unsafe extern "C" fn geobs_manifold_dim(m: *const GeobsManifold) -> usize {
    m.as_ref().map_or(0, |m| m.inner.dim())
}

/// Number of chart coordinates, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live manifold handle.
#[no_mangle]
pub unsafe extern "C" fn geobs_manifold_coord_dim(m: *const GeobsManifold) -> usize {
    m.as_ref().map_or(0, |m| m.inner.coord_dim())
}

/// `out = exp_q(v)`.
///
/// # Safety
/// `q`, `v` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn geobs_exp(
    m: *const GeobsManifold,
    q: *const f64,
    v: *const f64,
    len: usize,
    tol: f64,
    out: *mut f64,
) -> GeobsStatus {
    guard(|| {
        let m = &handle(m, "manifold")?.inner;
        check_len(m, len)?;
        let t = Tangent::from_slices(input(q, len, "q")?, input(v, len, "v")?)?;
        let p = m.exp(&t, tol)?;
        write(output(out, len, "out")?, p.as_slice());
        Ok(())
    })
}

/// `out = log_from(to)`.
///
/// # Safety
/// `from`, `to` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn geobs_log(
    m: *const GeobsManifold,
    from: *const f64,
    to: *const f64,
    len: usize,
    tol: f64,
    out: *mut f64,
) -> GeobsStatus {
    guard(|| {
        let m = &handle(m, "manifold")?.inner;
        check_len(m, len)?;
        let a = Point::from_slice(input(from, len, "from")?);
        let b = Point::from_slice(input(to, len, "to")?);
        let v = m.log(&a, &b, tol)?;
        write(output(out, len, "out")?, v.components.as_slice());
        Ok(())
    })
}

/// Riemannian distance between `a` and `b`.
///
/// # Safety
/// `a` and `b` must point to `len` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn geobs_distance(
    m: *const GeobsManifold,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> GeobsStatus {
    guard(|| {
        let m = &handle(m, "manifold")?.inner;
        check_len(m, len)?;
        let a = Point::from_slice(input(a, len, "a")?);
        let b = Point::from_slice(input(b, len, "b")?);
        let d = m.distance(&a, &b)?;
        output(out, 1, "out")?[0] = d;
        Ok(())
    })
}

/// Parallel transport of `v` at `base` to `to` along the connecting
/// geodesic.
///
/// # Safety
/// `base`, `v`, `to` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn geobs_transport(
    m: *const GeobsManifold,
    base: *const f64,
    v: *const f64,
    to: *const f64,
    len: usize,
    tol: f64,
    out: *mut f64,
) -> GeobsStatus {
    guard(|| {
        let m = &handle(m, "manifold")?.inner;
        check_len(m, len)?;
        let t = Tangent::from_slices(input(base, len, "base")?, input(v, len, "v")?)?;
        let target = Point::from_slice(input(to, len, "to")?);
        let moved = m.parallel_transport(&t, &target, tol)?;
        write(output(out, len, "out")?, moved.components.as_slice());
        Ok(())
    })
}

/// Sectional curvature of the plane spanned by `u` and `w` at `q`.
///
/// # Safety
/// `q`, `u` and `w` must point to `len` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn geobs_sectional_curvature(
    m: *const GeobsManifold,
    q: *const f64,
    u: *const f64,
    w: *const f64,
    len: usize,
    out: *mut f64,
) -> GeobsStatus {
    guard(|| {
        let m = &handle(m, "manifold")?.inner;
        check_len(m, len)?;
        let q = input(q, len, "q")?;
        let u = Tangent::from_slices(q, input(u, len, "u")?)?;
        let w = Tangent::from_slices(q, input(w, len, "w")?)?;
        let k = m.sectional_curvature(&Point::from_slice(q), &u, &w)?;
        output(out, 1, "out")?[0] = k;
        Ok(())
    })
}

/// Create an observer with gain `lambda`, first measurement `q0` and
/// initial state `xi_hat0`. The observer keeps its own reference to the
/// manifold; `m` may be freed afterwards.
///
/// # Safety
/// `q0` and `xi_hat0` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn geobs_observer_new(
    m: *const GeobsManifold,
    q0: *const f64,
    xi_hat0: *const f64,
    len: usize,
    lambda: f64,
    tol: f64,
    out: *mut *mut GeobsObserver,
) -> GeobsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = &handle(m, "manifold")?.inner;
        check_len(m, len)?;
        if tol <= 0.0 || !tol.is_finite() {
            return Err(invalid(format!("tol must be positive and finite, got {tol}")));
        }
        let q0 = Point::from_slice(input(q0, len, "q0")?);
        let xi = Point::from_slice(input(xi_hat0, len, "xi_hat0")?);
        for (p, what) in [(&q0, "q0"), (&xi, "xi_hat0")] {
            if !m.in_domain(p) {
                return Err(Failure(GeobsStatus::OutsideDomain, format!("{what} is outside the chart domain")));
            }
        }
        let obs = GeobsObserver {
            manifold: m.clone(),
            state: ObserverState::new(xi, lambda)?,
            q_last: q0,
            log_q_xi: None,
            tol,
        };
        *out = Box::into_raw(Box::new(obs));
        Ok(())
    })
}

/// Release an observer. Null is ignored.
///
/// # Safety
/// `obs` must come from `geobs_observer_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geobs_observer_free(obs: *mut GeobsObserver) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Advance the observer by `h` to the new measurement `q_next`. On failure
/// the observer is left unchanged.
///
/// # Safety
/// `obs` must be a live observer and `q_next` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn geobs_observer_step(
    obs: *mut GeobsObserver,
    q_next: *const f64,
    len: usize,
    h: f64,
) -> GeobsStatus {
    guard(|| {
        let obs = obs.as_mut().ok_or_else(|| null("observer"))?;
        check_len(&obs.manifold, len)?;
        let q_next = Point::from_slice(input(q_next, len, "q_next")?);
        let guess = obs.log_q_xi.as_ref().map(|t| &t.components);
        let step = pursuit_step(&obs.manifold, &obs.state, &obs.q_last, &q_next, h, obs.tol, guess)?;
        obs.state = step.state;
        obs.log_q_xi = Some(step.log_q_xi);
        obs.q_last = q_next;
        Ok(())
    })
}

/// Copy the current `ξ̂` into `out`.
///
/// # Safety
/// `obs` must be a live observer and `out` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn geobs_observer_xi_hat(obs: *const GeobsObserver, out: *mut f64, len: usize) -> GeobsStatus {
    guard(|| {
        let obs = handle(obs, "observer")?;
        check_len(&obs.manifold, len)?;
        write(output(out, len, "out")?, obs.state.xi_hat().as_slice());
        Ok(())
    })
}

/// Velocity estimate `-log_q(ξ̂) / λ` at the last measurement.
///
/// # Safety
/// `obs` must be a live observer and `out` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn geobs_observer_velocity(obs: *const GeobsObserver, out: *mut f64, len: usize) -> GeobsStatus {
    guard(|| {
        let obs = handle(obs, "observer")?;
        check_len(&obs.manifold, len)?;
        let log = match &obs.log_q_xi {
            Some(l) => l.clone(),
            None => obs.manifold.log(&obs.q_last, obs.state.xi_hat(), obs.tol)?,
        };
        let v = velocity_from_log(&log, obs.state.lambda());
        write(output(out, len, "out")?, v.components.as_slice());
        Ok(())
    })
}

/// Observer clock.
///
/// # Safety
/// `obs` must be null or a live observer.
#[no_mangle]
pub unsafe extern "C" fn geobs_observer_time(obs: *const GeobsObserver) -> f64 {
    obs.as_ref().map_or(f64::NAN, |o| o.state.t())
}

/// Run a scenario given as JSON. On success `*out_json` receives
/// `{"summary": ..., "report": ...}`, to be released with
/// [`geobs_string_free`], and `*out_exit_code` (if non-null) the CLI exit
/// code: 0 for a clean run, 2 for divergence or a breached bound.
///
/// # Safety
/// `scenario_json` must be NUL-terminated and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn geobs_run_scenario_json(
    scenario_json: *const c_char,
    out_json: *mut *mut c_char,
    out_exit_code: *mut i32,
) -> GeobsStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let cfg = ScenarioConfig::from_json(text(scenario_json, "scenario_json")?)?;
        let result = run_scenario(&cfg)?;
        let json = serde_json::json!({ "summary": result.summary, "report": result.report }).to_string();
        let c = CString::new(json).map_err(|e| invalid(e.to_string()))?;
        if let Some(code) = out_exit_code.as_mut() {
            *code = result.exit_code();
        }
        *out_json = c.into_raw();
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn geobs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
