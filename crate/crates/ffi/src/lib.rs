//! C ABI over the `aitsahalia` library.
//!
//! Conventions:
//! * every fallible function returns an [`AsStatus`]; results go through
//!   out-pointers, which are left untouched on failure;
//! * objects are opaque handles created by `*_new` / producer functions and
//!   released with the matching `*_free` (null is accepted and ignored);
//! * after a failure, [`as_last_error_message`] returns a description that
//!   stays valid until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aitsahalia::{
    bem_step, classify_regime, explicit_step, run_convergence, ConvergenceReport, Correction, CorrectionKind, Error,
    ExperimentConfig, Integrator, JumpCoefficient, ModelParams, NoisePath, RegimeTag, SchemeTag, StepInputs,
    Trajectory,
};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericOverflow = 3,
    SimulationFailure = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsScheme {
    Tem = 0,
    Pem = 1,
    Bem = 2,
    ExplicitIdentity = 3,
}

impl From<AsScheme> for SchemeTag {
    fn from(s: AsScheme) -> Self {
        match s {
            AsScheme::Tem => SchemeTag::Tem,
            AsScheme::Pem => SchemeTag::Pem,
            AsScheme::Bem => SchemeTag::Bem,
            AsScheme::ExplicitIdentity => SchemeTag::ExplicitIdentity,
        }
    }
}

fn scheme_from_tag(t: SchemeTag) -> AsScheme {
    match t {
        SchemeTag::Tem => AsScheme::Tem,
        SchemeTag::Pem => AsScheme::Pem,
        SchemeTag::Bem => AsScheme::Bem,
        _ => AsScheme::ExplicitIdentity,
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsCorrection {
    Identity = 0,
    Tamed = 1,
    Projected = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsRegime {
    NonCritical = 0,
    CriticalSupported = 1,
    CriticalUnsupported = 2,
    Invalid = 3,
}

/// Model constants plus the jump scale `c` in `nu(x) = c x`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsParams {
    pub alpha_m1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub sigma: f64,
    pub r: f64,
    pub rho: f64,
    pub lambda: f64,
    pub x0: f64,
    pub jump_scale: f64,
}

impl AsParams {
    fn from_model(p: &ModelParams) -> Self {
        AsParams {
            alpha_m1: p.alpha_m1,
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            sigma: p.sigma,
            r: p.r,
            rho: p.rho,
            lambda: p.lambda,
            x0: p.x0,
            jump_scale: 0.5,
        }
    }

    fn model(&self) -> ModelParams {
        ModelParams {
            alpha_m1: self.alpha_m1,
            alpha0: self.alpha0,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            sigma: self.sigma,
            r: self.r,
            rho: self.rho,
            lambda: self.lambda,
            x0: self.x0,
        }
    }
}

/// Error study settings. Schemes are chosen with a bit mask over
/// [`AsScheme`] values (`1 << AS_SCHEME_TEM | ...`).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsExperiment {
    pub horizon: f64,
    pub h_exact: f64,
    pub h_list: *const f64,
    pub h_count: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme_mask: u32,
}

/// Validated parameters and jump coefficient.
pub struct AsModel {
    params: ModelParams,
    jump: JumpCoefficient,
}

pub struct AsTrajectory {
    inner: Trajectory,
}

pub struct AsReport {
    inner: ConvergenceReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> AsStatus {
    match e.root() {
        Error::InvalidParam { .. } | Error::Divisibility { .. } | Error::Config(_) | Error::Domain { .. } => {
            AsStatus::InvalidArgument
        }
        Error::NumericOverflow { .. } => AsStatus::NumericOverflow,
        _ => AsStatus::SimulationFailure,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (AsStatus, String)>) -> AsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (AsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (AsStatus, String) {
    (AsStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (AsStatus, String)> {
    unsafe { p.as_ref() }.ok_or_else(|| null(name))
}

/// Description of the last failure on this thread; empty after success.
#[no_mangle]
pub extern "C" fn as_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn as_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out` with the first built-in parameter set (`which = 1`) or the
/// second (`which = 2`).
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_params_preset(which: u32, out: *mut AsParams) -> AsStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let p = match which {
            1 => ModelParams::example1(),
            2 => ModelParams::example2(),
            _ => return Err((AsStatus::InvalidArgument, format!("unknown preset {which}"))),
        };
        *out = AsParams::from_model(&p);
        Ok(())
    })
}

/// # Safety
/// `params` must be null or point to an `AsParams`; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_model_new(params: *const AsParams, out: *mut *mut AsModel) -> AsStatus {
    guard(|| {
        let params = unsafe { deref(params, "params") }?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let p = params.model();
        p.validate().map_err(lib_err)?;
        let jump = JumpCoefficient::linear(params.jump_scale).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(AsModel { params: p, jump }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`as_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_model_free(model: *mut AsModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_model_regime(model: *const AsModel, out: *mut AsRegime) -> AsStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let regime = classify_regime(&m.params);
        *out = match regime.tag {
            RegimeTag::NonCritical => AsRegime::NonCritical,
            RegimeTag::CriticalSupported => AsRegime::CriticalSupported,
            RegimeTag::CriticalUnsupported => AsRegime::CriticalUnsupported,
            RegimeTag::Invalid => AsRegime::Invalid,
        };
        Ok(())
    })
}

/// One step of the semi-implicit explicit scheme. `kappa` is used only for
/// the projected correction; pass a value `<= 0` for the default.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_explicit_step(
    model: *const AsModel,
    correction: AsCorrection,
    kappa: f64,
    y: f64,
    h: f64,
    dw: f64,
    dn: u32,
    out: *mut f64,
) -> AsStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let kind = match correction {
            AsCorrection::Identity => CorrectionKind::Identity,
            AsCorrection::Tamed => CorrectionKind::Tamed,
            AsCorrection::Projected if kappa > 0.0 => CorrectionKind::Projected { kappa },
            AsCorrection::Projected => CorrectionKind::projected_default(&m.params),
        };
        let c = Correction::new(kind, h, &m.params).map_err(lib_err)?;
        let s = StepInputs::new(y, h, dw, dn).map_err(lib_err)?;
        *out = explicit_step(&s, &c, &m.jump).map_err(lib_err)?.value;
        Ok(())
    })
}

/// One drift-implicit backward Euler step.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_bem_step(model: *const AsModel, y: f64, h: f64, dw: f64, dn: u32, out: *mut f64) -> AsStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let s = StepInputs::new(y, h, dw, dn).map_err(lib_err)?;
        *out = bem_step(&s, &m.params, &m.jump).map_err(lib_err)?.value;
        Ok(())
    })
}

/// Simulates one path of `n_steps` steps from the model's `x0`, driven by
/// the noise of `(seed, path_index)`.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_simulate(
    model: *const AsModel,
    scheme: AsScheme,
    h: f64,
    n_steps: usize,
    seed: u64,
    path_index: u64,
    out: *mut *mut AsTrajectory,
) -> AsStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let integ = Integrator::new(scheme.into(), h, &m.params, &m.jump, None).map_err(lib_err)?;
        let noise = NoisePath::generate(seed, path_index, n_steps, h, m.params.lambda).map_err(lib_err)?;
        let inner = integ.simulate(&noise, m.params.x0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(AsTrajectory { inner }));
        Ok(())
    })
}

/// Number of stored values (steps + 1); 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn as_trajectory_len(t: *const AsTrajectory) -> usize {
    unsafe { t.as_ref() }.map_or(0, |t| t.inner.values.len())
}

/// Copies the values into `buf` (capacity `cap`).
///
/// # Safety
/// `t` must be a live handle; `buf` must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn as_trajectory_values(t: *const AsTrajectory, buf: *mut f64, cap: usize) -> AsStatus {
    guard(|| {
        let t = unsafe { deref(t, "trajectory") }?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = &t.inner.values;
        if cap < v.len() {
            return Err((AsStatus::BufferTooSmall, format!("need {} values, got capacity {cap}", v.len())));
        }
        unsafe { ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len()) };
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from [`as_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_trajectory_free(t: *mut AsTrajectory) {
    if !t.is_null() {
        drop(unsafe { Box::from_raw(t) });
    }
}

/// Runs the mean-square error study against a backward Euler reference.
/// `workers = 0` uses every available core.
///
/// # Safety
/// `model` must be a live handle; `cfg` must point to an `AsExperiment`
/// whose `h_list` holds `h_count` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_convergence(
    model: *const AsModel,
    cfg: *const AsExperiment,
    workers: usize,
    out: *mut *mut AsReport,
) -> AsStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let c = unsafe { deref(cfg, "cfg") }?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        if c.h_list.is_null() || c.h_count == 0 {
            return Err((AsStatus::InvalidArgument, "h_list is empty".into()));
        }
        let h_list = unsafe { std::slice::from_raw_parts(c.h_list, c.h_count) }.to_vec();
        let schemes: Vec<SchemeTag> = [AsScheme::Tem, AsScheme::Pem, AsScheme::Bem, AsScheme::ExplicitIdentity]
            .into_iter()
            .filter(|s| c.scheme_mask & (1 << *s as u32) != 0)
            .map(SchemeTag::from)
            .collect();
        if schemes.is_empty() {
            return Err((AsStatus::InvalidArgument, "scheme_mask selects no scheme".into()));
        }
        let exp = ExperimentConfig {
            params: m.params,
            jump: m.jump.clone(),
            horizon: c.horizon,
            h_list,
            h_exact: c.h_exact,
            n_paths: c.n_paths,
            schemes,
            seed: c.seed,
            ..ExperimentConfig::standard(m.params)
        };
        exp.validate().map_err(lib_err)?;
        let inner = run_convergence(&exp, workers).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(AsReport { inner }));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn as_report_scheme_count(r: *const AsReport) -> usize {
    unsafe { r.as_ref() }.map_or(0, |r| r.inner.schemes.len())
}

/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn as_report_level_count(r: *const AsReport) -> usize {
    unsafe { r.as_ref() }.map_or(0, |r| r.inner.schemes.first().map_or(0, |s| s.errors.len()))
}

/// Fitted rate of scheme `i`. `q` and `resid` are NaN when no fit exists.
///
/// # Safety
/// `r` must be a live handle; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_report_rate(
    r: *const AsReport,
    i: usize,
    scheme: *mut AsScheme,
    q: *mut f64,
    resid: *mut f64,
) -> AsStatus {
    guard(|| {
        let r = unsafe { deref(r, "report") }?;
        let s = r
            .inner
            .schemes
            .get(i)
            .ok_or_else(|| (AsStatus::InvalidArgument, format!("scheme index {i} out of range")))?;
        let (scheme, q, resid) = unsafe { (scheme.as_mut(), q.as_mut(), resid.as_mut()) };
        let (Some(scheme), Some(q), Some(resid)) = (scheme, q, resid) else {
            return Err(null("out"));
        };
        *scheme = scheme_from_tag(s.scheme);
        *q = s.fit.map_or(f64::NAN, |f| f.q);
        *resid = s.fit.map_or(f64::NAN, |f| f.resid);
        Ok(())
    })
}

/// Error estimate of scheme `i` at step index `level`.
///
/// # Safety
/// `r` must be a live handle; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn as_report_error(
    r: *const AsReport,
    i: usize,
    level: usize,
    h: *mut f64,
    e_h: *mut f64,
    stderr: *mut f64,
) -> AsStatus {
    guard(|| {
        let r = unsafe { deref(r, "report") }?;
        let e = r
            .inner
            .schemes
            .get(i)
            .and_then(|s| s.errors.get(level))
            .ok_or_else(|| (AsStatus::InvalidArgument, format!("index ({i}, {level}) out of range")))?;
        let (h, e_h, stderr) = unsafe { (h.as_mut(), e_h.as_mut(), stderr.as_mut()) };
        let (Some(h), Some(e_h), Some(stderr)) = (h, e_h, stderr) else {
            return Err(null("out"));
        };
        (*h, *e_h, *stderr) = (e.h, e.e_h, e.stderr);
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from [`as_convergence`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_report_free(r: *mut AsReport) {
    if !r.is_null() {
        drop(unsafe { Box::from_raw(r) });
    }
}
