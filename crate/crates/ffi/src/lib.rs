//! C bindings for the `hinge-bandits` learners, surrogates and harness.
//!
//! Every fallible function returns an [`HbStatus`]; on failure the message is
//! kept per thread and can be read with [`hb_last_error_message`]. Learners
//! are opaque [`HbLearner`] handles owned by the caller and released with
//! [`hb_learner_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hinge_bandits::harness::{self, ExperimentConfig};
use hinge_bandits::hinge_lmc::{HingeLmc, HingeLmcConfig};
use hinge_bandits::sampler::{theoretical_params, TheoryInputs};
use hinge_bandits::smooth_ftl::{FtlConfig, SmoothFtl};
use hinge_bandits::surrogate;
use hinge_bandits::{Context, Error, Learner, LossVector, Margin, ModelSpec, ScoreVector, UniformBaseline};

/// Result codes; `HB_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    Domain = 3,
    Config = 4,
    Budget = 5,
    Io = 6,
    Parse = 7,
    InvalidUtf8 = 8,
    Panic = 9,
}

impl From<&Error> for HbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => HbStatus::DimensionMismatch,
            Error::Domain(_) => HbStatus::Domain,
            Error::Config(_) => HbStatus::Config,
            Error::Budget(_) => HbStatus::Budget,
            Error::Io(_) => HbStatus::Io,
            Error::Parse(_) => HbStatus::Parse,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(HbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(HbStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HbStatus::Ok,
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
            HbStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(HbStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length
/// excluding the terminator. Returns 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Forgets the calling thread's last error.
#[no_mangle]
pub extern "C" fn hb_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Shape of the linear model: `actions` blocks of `context_dim` weights
/// constrained to the ball of `radius`, contexts bounded by `context_bound`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HbModelSpec {
    pub context_dim: usize,
    pub actions: usize,
    pub radius: f64,
    pub context_bound: f64,
}

impl HbModelSpec {
    fn to_spec(self) -> Result<ModelSpec, Failure> {
        Ok(ModelSpec::new(self.context_dim, self.actions, self.radius, self.context_bound)?)
    }
}

/// Opaque learner handle.
pub struct HbLearner {
    inner: Box<dyn Learner + Send>,
    context_dim: usize,
}

fn boxed(out: *mut *mut HbLearner, inner: Box<dyn Learner + Send>, context_dim: usize) -> Result<(), Failure> {
    let out = unsafe { out_ref(out, "out")? };
    *out = Box::into_raw(Box::new(HbLearner { inner, context_dim }));
    Ok(())
}

/// Creates a learner that plays uniformly at random.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn hb_learner_new_uniform(
    context_dim: usize,
    actions: usize,
    seed: u64,
    out: *mut *mut HbLearner,
) -> HbStatus {
    guard(|| {
        if actions < 2 {
            return Err(Failure(HbStatus::Domain, "need at least two actions".into()));
        }
        boxed(out, Box::new(UniformBaseline::new(actions, seed)), context_dim)
    })
}

/// Creates a Hinge-LMC learner with the practical defaults for `horizon`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn hb_learner_new_hinge_lmc(
    spec: HbModelSpec,
    horizon: usize,
    gamma: f64,
    seed: u64,
    out: *mut *mut HbLearner,
) -> HbStatus {
    guard(|| {
        let model = spec.to_spec()?;
        let config = HingeLmcConfig::practical(&model, horizon, Margin::new(gamma)?, seed);
        boxed(out, Box::new(HingeLmc::new(model, config)?), spec.context_dim)
    })
}

/// Creates a SmoothFTL learner with the practical defaults for `horizon`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn hb_learner_new_smooth_ftl(
    spec: HbModelSpec,
    horizon: usize,
    gamma: f64,
    seed: u64,
    out: *mut *mut HbLearner,
) -> HbStatus {
    guard(|| {
        let model = spec.to_spec()?;
        let config = FtlConfig::practical(&model, horizon, Margin::new(gamma)?, seed);
        boxed(out, Box::new(SmoothFtl::new(model, config)?), spec.context_dim)
    })
}

/// Number of actions of `learner`, or 0 for a null handle.
///
/// # Safety
/// `learner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hb_learner_actions(learner: *const HbLearner) -> usize {
    learner.as_ref().map_or(0, |l| l.inner.actions())
}

/// Chooses an action for the context `x` (length `context_dim`). Writes the
/// action to `action` and, when `probs` is non-null, the sampling
/// distribution to `probs` (length `probs_len`, which must equal the number
/// of actions).
///
/// # Safety
/// `learner` must be a live handle and the buffers valid for their lengths.
#[no_mangle]
pub unsafe extern "C" fn hb_learner_act(
    learner: *mut HbLearner,
    x: *const f64,
    x_len: usize,
    action: *mut usize,
    probs: *mut f64,
    probs_len: usize,
) -> HbStatus {
    guard(|| {
        let l = out_ref(learner, "learner")?;
        let x = slice(x, x_len, "x")?;
        if x.len() != l.context_dim {
            return Err(Error::DimensionMismatch { expected: l.context_dim, actual: x.len() }.into());
        }
        let action = out_ref(action, "action")?;
        if !probs.is_null() && probs_len != l.inner.actions() {
            return Err(Error::DimensionMismatch { expected: l.inner.actions(), actual: probs_len }.into());
        }
        let choice = l.inner.act(&Context::new(x.to_vec()))?;
        *action = choice.action;
        if !probs.is_null() {
            std::slice::from_raw_parts_mut(probs, probs_len).copy_from_slice(choice.distribution.probs());
        }
        Ok(())
    })
}

/// Reports the loss in `[0, 1]` of the action chosen by the last
/// `hb_learner_act`. When `estimate` is non-null it receives the played
/// coordinate of the loss estimate used in the update.
///
/// # Safety
/// `learner` must be a live handle; `estimate` null or writable.
#[no_mangle]
pub unsafe extern "C" fn hb_learner_observe(learner: *mut HbLearner, loss: f64, estimate: *mut f64) -> HbStatus {
    guard(|| {
        let l = out_ref(learner, "learner")?;
        let fb = l.inner.observe(loss)?;
        if let Some(e) = estimate.as_mut() {
            *e = fb.estimate;
        }
        Ok(())
    })
}

/// Releases a learner. Null is ignored.
///
/// # Safety
/// `learner` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hb_learner_free(learner: *mut HbLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

/// Ramp surrogate at score `s`; NaN if `gamma` is not positive.
#[no_mangle]
pub extern "C" fn hb_ramp(s: f64, gamma: f64) -> f64 {
    Margin::new(gamma).map_or(f64::NAN, |g| surrogate::ramp(s, g))
}

/// Hinge surrogate at score `s`; NaN if `gamma` is not positive.
#[no_mangle]
pub extern "C" fn hb_hinge(s: f64, gamma: f64) -> f64 {
    Margin::new(gamma).map_or(f64::NAN, |g| surrogate::hinge(s, g))
}

/// Which surrogate induces the policy in `hb_induced_policy`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbSurrogate {
    Hinge = 0,
    Ramp = 1,
}

/// Policy induced by the scores (`k` entries, re-centered to sum to zero),
/// written to `out` (`k` entries).
///
/// # Safety
/// `scores` and `out` must be valid for `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn hb_induced_policy(
    kind: HbSurrogate,
    scores: *const f64,
    k: usize,
    gamma: f64,
    out: *mut f64,
) -> HbStatus {
    guard(|| {
        let s = ScoreVector::centered(slice(scores, k, "scores")?)?;
        let g = Margin::new(gamma)?;
        let p = match kind {
            HbSurrogate::Hinge => surrogate::induced_policy_hinge(&s, g),
            HbSurrogate::Ramp => surrogate::induced_policy_ramp(&s, g),
        };
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, k).copy_from_slice(p.probs());
        Ok(())
    })
}

/// Cost-sensitive surrogate loss `Σ_a ℓ_a φ(s_a)` of centered scores
/// against a loss vector in `[0, 1]^k`.
///
/// # Safety
/// `scores` and `loss` must be valid for `k` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hb_cc_loss(
    kind: HbSurrogate,
    scores: *const f64,
    loss: *const f64,
    k: usize,
    gamma: f64,
    out: *mut f64,
) -> HbStatus {
    guard(|| {
        let s = ScoreVector::centered(slice(scores, k, "scores")?)?;
        let l = LossVector::bounded(slice(loss, k, "loss")?.to_vec())?;
        let g = Margin::new(gamma)?;
        let v = match kind {
            HbSurrogate::Hinge => surrogate::cc_hinge_loss(&s, &l, g)?,
            HbSurrogate::Ramp => surrogate::cc_ramp_loss(&s, &l, g)?,
        };
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// Inputs of the worst-case parameter formulas. `eta <= 0` means "derive
/// from the horizon".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HbTheoryInputs {
    pub horizon: f64,
    pub dim: usize,
    pub actions: usize,
    pub radius: f64,
    pub lipschitz: f64,
    pub score_bound: f64,
    pub gamma: f64,
    pub loss_bound: f64,
    pub eta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HbTheoryParams {
    pub eta: f64,
    pub mu: f64,
    pub resample_cap: f64,
    pub smoothing_width: f64,
    pub ridge: f64,
    pub step_size: f64,
    pub steps: f64,
    pub smoothing_samples: f64,
    pub log_factor: f64,
}

/// Evaluates the worst-case sampler and learner parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hb_theoretical_params(inputs: HbTheoryInputs, out: *mut HbTheoryParams) -> HbStatus {
    guard(|| {
        let p = theoretical_params(&TheoryInputs {
            horizon: inputs.horizon,
            dim: inputs.dim,
            actions: inputs.actions,
            radius: inputs.radius,
            lipschitz: inputs.lipschitz,
            score_bound: inputs.score_bound,
            gamma: inputs.gamma,
            loss_bound: inputs.loss_bound,
            eta: (inputs.eta > 0.0).then_some(inputs.eta),
        })?;
        *out_ref(out, "out")? = HbTheoryParams {
            eta: p.eta,
            mu: p.mu,
            resample_cap: p.resample_cap,
            smoothing_width: p.smoothing_width,
            ridge: p.ridge,
            step_size: p.step_size,
            steps: p.steps,
            smoothing_samples: p.smoothing_samples,
            log_factor: p.log_factor,
        };
        Ok(())
    })
}

/// Runs the experiment described by the TOML text `config` and writes its
/// CSV, JSON and SVG outputs. `out_dir`, when non-null, overrides the
/// configured output directory. When `summary_json` is non-null it receives
/// the run summary as a string to be released with `hb_string_free`.
///
/// # Safety
/// `config` and `out_dir` must be null or NUL-terminated; `summary_json`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn hb_run_experiment(
    config: *const c_char,
    out_dir: *const c_char,
    summary_json: *mut *mut c_char,
) -> HbStatus {
    guard(|| {
        let mut cfg = ExperimentConfig::from_toml(c_str(config, "config")?)?;
        if !out_dir.is_null() {
            cfg.output.dir = PathBuf::from(c_str(out_dir, "out_dir")?);
        }
        let result = harness::run_experiment(&cfg)?;
        harness::write_outputs(&result, &cfg.output)?;
        if let Some(out) = summary_json.as_mut() {
            let json = harness::output::summary_json(&result.summary)?;
            *out = CString::new(json).map_err(|e| Failure(HbStatus::Parse, e.to_string()))?.into_raw();
        }
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
