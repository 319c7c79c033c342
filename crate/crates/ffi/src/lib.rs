//! C ABI over `smoothsgd`.
//!
//! Every entry point returns an [`SsgStatus`]; results go through out
//! pointers. On failure a message is kept per thread and can be copied out
//! with [`ssg_last_error`]. Handles are opaque and must be released with the
//! matching `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use smoothsgd::certify::certify;
use smoothsgd::config::ExperimentConfig;
use smoothsgd::dynamics::{run_sgd, InitLaw, RunConfig};
use smoothsgd::harness::{self, envelope_row};
use smoothsgd::noise::NoiseModel;
use smoothsgd::objectives::ObjectiveSpec;
use smoothsgd::quadrature::DEFAULT_ORDER_CAP;
use smoothsgd::smoothing::SmoothedView;
use smoothsgd::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RegimeViolation = 3,
    QuadratureNonConvergence = 4,
    NewtonNonConvergence = 5,
    NoStationaryPoint = 6,
    Diverged = 7,
    CertificateFailed = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsgObjectiveKind {
    /// `param` is the center.
    Quadratic = 0,
    /// `param` is δ.
    AsymQuadBump = 1,
    /// `param` is δ.
    SymBump = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsgNoiseKind {
    /// `p1` = r.
    Uniform = 0,
    /// `p1` = s.
    Gaussian = 1,
    Zero = 2,
    /// `p1` = r, `p2` = β.
    StateScaled = 3,
}

/// Opaque objective handle.
pub struct SsgObjective(ObjectiveSpec);

/// Opaque noise-law handle.
pub struct SsgNoise(NoiseModel);

/// Opaque smoothed view: objective, noise and step size together.
pub struct SsgView(SmoothedView);

/// Value and first two derivatives.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsgJet {
    pub value: f64,
    pub grad: f64,
    pub hess: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsgCertificate {
    pub lipschitz: f64,
    pub sigma1_sq: f64,
    pub sigma2: f64,
    pub c: f64,
    pub mu: f64,
    pub m1: f64,
    pub m2: f64,
    pub vstar: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    /// 1 when `c > 0` and `mu > 0`.
    pub valid: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsgTrajectory {
    pub w0: f64,
    pub final_w: f64,
    pub tail_avg_w: f64,
    pub tail_avg_v: f64,
    pub steps: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsgEnsembleSummary {
    pub vstar: f64,
    pub trials: usize,
    pub diverged: usize,
    pub mean_abs_final: f64,
    pub se_abs_final: f64,
    pub mean_abs_tail: f64,
    pub se_abs_tail: f64,
    pub time_avg_mse: f64,
    pub se_time_avg_mse: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SsgStatus {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::UnknownPreset { .. } => SsgStatus::InvalidArgument,
        Error::RegimeViolation { .. } => SsgStatus::RegimeViolation,
        Error::QuadratureNonConvergence { .. } => SsgStatus::QuadratureNonConvergence,
        Error::NewtonNonConvergence { .. } => SsgStatus::NewtonNonConvergence,
        Error::NoStationaryPoint { .. } => SsgStatus::NoStationaryPoint,
        Error::Diverged { .. } | Error::AllTrialsDiverged { .. } => SsgStatus::Diverged,
        Error::CertificateFailed(_) | Error::TooFewSweepPoints { .. } => SsgStatus::CertificateFailed,
        Error::Io(_) => SsgStatus::Io,
    }
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SsgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SsgStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SsgStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SsgStatus::Panic
        }
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(p: *mut T, what: &'static str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(value);
    Ok(())
}

/// Copies the calling thread's last error message (NUL-terminated, possibly
/// truncated) into `buf`. Returns the full message length in bytes,
/// excluding the terminator; pass `buf = NULL` to query it.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ssg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `out` must be a valid pointer; the handle written there is owned by the
/// caller.
#[no_mangle]
pub unsafe extern "C" fn ssg_objective_new(kind: SsgObjectiveKind, param: f64, out: *mut *mut SsgObjective) -> SsgStatus {
    guard(|| {
        let spec = match kind {
            SsgObjectiveKind::Quadratic => {
                let s = ObjectiveSpec::quadratic(param);
                s.validate()?;
                s
            }
            SsgObjectiveKind::AsymQuadBump => ObjectiveSpec::asym_quad_bump(param)?,
            SsgObjectiveKind::SymBump => ObjectiveSpec::sym_bump(param)?,
        };
        write_out(out, "out", Box::into_raw(Box::new(SsgObjective(spec))))
    })
}

/// Polynomial `Σ coefficients[k] w^k`.
///
/// # Safety
/// `coefficients` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_objective_polynomial_new(
    coefficients: *const f64,
    n: usize,
    out: *mut *mut SsgObjective,
) -> SsgStatus {
    guard(|| {
        let c = deref(coefficients, "coefficients")?;
        let coeffs = std::slice::from_raw_parts(c, n).to_vec();
        let spec = ObjectiveSpec::polynomial(coeffs)?;
        write_out(out, "out", Box::into_raw(Box::new(SsgObjective(spec))))
    })
}

/// # Safety
/// `obj` must be NULL or a handle from `ssg_objective_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssg_objective_free(obj: *mut SsgObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// # Safety
/// `obj` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_objective_eval(obj: *const SsgObjective, w: f64, out: *mut SsgJet) -> SsgStatus {
    guard(|| {
        let j = deref(obj, "obj")?.0.eval(w);
        write_out(out, "out", SsgJet { value: j.value, grad: j.grad, hess: j.hess })
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_noise_new(kind: SsgNoiseKind, p1: f64, p2: f64, out: *mut *mut SsgNoise) -> SsgStatus {
    guard(|| {
        let model = match kind {
            SsgNoiseKind::Uniform => NoiseModel::Uniform { r: p1 },
            SsgNoiseKind::Gaussian => NoiseModel::Gaussian { s: p1 },
            SsgNoiseKind::Zero => NoiseModel::Zero,
            SsgNoiseKind::StateScaled => NoiseModel::StateScaled { r: p1, beta: p2 },
        };
        model.validate()?;
        write_out(out, "out", Box::into_raw(Box::new(SsgNoise(model))))
    })
}

/// # Safety
/// `noise` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssg_noise_free(noise: *mut SsgNoise) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

/// The view copies what it needs; `obj` and `noise` may be freed afterwards.
///
/// # Safety
/// `obj`, `noise` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_view_new(
    obj: *const SsgObjective,
    noise: *const SsgNoise,
    eta: f64,
    out: *mut *mut SsgView,
) -> SsgStatus {
    guard(|| {
        let o = deref(obj, "obj")?.0.clone();
        let n = deref(noise, "noise")?.0;
        let view = SmoothedView::new(o, n, eta)?;
        write_out(out, "out", Box::into_raw(Box::new(SsgView(view))))
    })
}

/// # Safety
/// `view` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssg_view_free(view: *mut SsgView) {
    if !view.is_null() {
        drop(Box::from_raw(view));
    }
}

/// Smoothed objective and its derivatives at `v`.
///
/// # Safety
/// `view` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_view_smoothed(view: *const SsgView, v: f64, out: *mut SsgJet) -> SsgStatus {
    guard(|| {
        let j = deref(view, "view")?.0.smoothed_eval(v)?;
        write_out(out, "out", SsgJet { value: j.value, grad: j.grad, hess: j.hess })
    })
}

/// Global minimizer of the smoothed objective on `[lo, hi]`.
///
/// # Safety
/// `view` and `vstar` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_view_minimize(view: *const SsgView, lo: f64, hi: f64, vstar: *mut f64) -> SsgStatus {
    guard(|| {
        let m = deref(view, "view")?.0.minimize(lo, hi)?;
        write_out(vstar, "vstar", m.vstar)
    })
}

/// `v = w - η f'(w)`; fails with `REGIME_VIOLATION` when `η > 1/(2L)`.
///
/// # Safety
/// `view` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_view_phi(view: *const SsgView, w: f64, out: *mut f64) -> SsgStatus {
    guard(|| {
        let v = deref(view, "view")?.0.phi_forward(w)?;
        write_out(out, "out", v)
    })
}

/// # Safety
/// `view` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_view_phi_inverse(view: *const SsgView, v: f64, out: *mut f64) -> SsgStatus {
    guard(|| {
        let w = deref(view, "view")?.0.phi_inverse(v)?;
        write_out(out, "out", w)
    })
}

/// Certifies the constants around the minimizer found in `[lo, hi]`.
/// A certificate with `valid = 0` is still written and the call returns OK.
///
/// # Safety
/// `view` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_certify(
    view: *const SsgView,
    lo: f64,
    hi: f64,
    grid_n: usize,
    out: *mut SsgCertificate,
) -> SsgStatus {
    guard(|| {
        let v = &deref(view, "view")?.0;
        let k = certify(v, (lo, hi), grid_n, envelope_row(v.objective()))?;
        write_out(
            out,
            "out",
            SsgCertificate {
                lipschitz: k.lipschitz,
                sigma1_sq: k.sigma1_sq,
                sigma2: k.sigma2,
                c: k.c,
                mu: k.mu,
                m1: k.m1,
                m2: k.m2,
                vstar: k.vstar,
                window_lo: k.window.0,
                window_hi: k.window.1,
                valid: k.is_valid() as i32,
            },
        )
    })
}

/// One SGD run of `steps` steps from `w0`; the tail average covers the
/// second half.
///
/// # Safety
/// `view` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_run_sgd(
    view: *const SsgView,
    steps: usize,
    w0: f64,
    seed: u64,
    out: *mut SsgTrajectory,
) -> SsgStatus {
    guard(|| {
        let v = &deref(view, "view")?.0;
        let cfg = RunConfig::new(v.eta(), steps, InitLaw::Fixed(w0), seed);
        let t = run_sgd(v.objective(), v.noise(), &cfg, None)?;
        write_out(
            out,
            "out",
            SsgTrajectory {
                w0: t.w0,
                final_w: t.final_w,
                tail_avg_w: t.tail_avg_w,
                tail_avg_v: t.tail_avg_v,
                steps: t.steps,
            },
        )
    })
}

/// Ensemble of `trials` runs with `w0 ~ U[w0_lo, w0_hi]` (a fixed start when
/// the bounds coincide). The minimizer is searched in `[lo, hi]`.
/// `workers = 0` uses every core; results do not depend on it.
///
/// # Safety
/// `view` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_run_ensemble(
    view: *const SsgView,
    steps: usize,
    trials: usize,
    w0_lo: f64,
    w0_hi: f64,
    lo: f64,
    hi: f64,
    seed: u64,
    workers: usize,
    out: *mut SsgEnsembleSummary,
) -> SsgStatus {
    guard(|| {
        let v = &deref(view, "view")?.0;
        let w0 = if w0_lo == w0_hi { InitLaw::Fixed(w0_lo) } else { InitLaw::UniformInterval { lo: w0_lo, hi: w0_hi } };
        let cfg = ExperimentConfig {
            preset: None,
            objective: v.objective().clone(),
            noise: *v.noise(),
            run: RunConfig::new(v.eta(), steps, w0, seed),
            trials,
            window: (lo, hi),
            order_cap: DEFAULT_ORDER_CAP,
            trap: None,
            sweep_etas: Vec::new(),
            sweep_deltas: Vec::new(),
            sweep_horizon: None,
            certify_grid: smoothsgd::certify::MIN_GRID,
            landscape_points: 0,
        };
        cfg.run.validate()?;
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()).into());
        }
        let r = harness::run_ensemble(&cfg, v, workers)?;
        write_out(
            out,
            "out",
            SsgEnsembleSummary {
                vstar: r.vstar,
                trials: r.trials.len(),
                diverged: r.diverged,
                mean_abs_final: r.abs_final.mean,
                se_abs_final: r.abs_final.stderr,
                mean_abs_tail: r.abs_tail.mean,
                se_abs_tail: r.abs_tail.stderr,
                time_avg_mse: r.time_avg_mse.mean,
                se_time_avg_mse: r.time_avg_mse.stderr,
            },
        )
    })
}

/// Runs a named experiment preset and summarizes its ensemble.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssg_run_preset(
    name: *const c_char,
    seed: u64,
    workers: usize,
    out: *mut SsgEnsembleSummary,
) -> SsgStatus {
    guard(|| {
        if name.is_null() {
            return Err(Failure::Null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Error::InvalidArgument("preset name is not UTF-8".into()))?;
        let mut cfg = harness::preset(name)?;
        cfg.run.seed = seed;
        let view = harness::make_view(&cfg)?;
        let r = harness::run_ensemble(&cfg, &view, workers)?;
        write_out(
            out,
            "out",
            SsgEnsembleSummary {
                vstar: r.vstar,
                trials: r.trials.len(),
                diverged: r.diverged,
                mean_abs_final: r.abs_final.mean,
                se_abs_final: r.abs_final.stderr,
                mean_abs_tail: r.abs_tail.mean,
                se_abs_tail: r.abs_tail.stderr,
                time_avg_mse: r.time_avg_mse.mean,
                se_time_avg_mse: r.time_avg_mse.stderr,
            },
        )
    })
}
