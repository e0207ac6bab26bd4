//! C ABI for the pricelab simulator.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns a
//! [`PricelabStatus`]; on failure a message is available from
//! [`pricelab_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pricelab::config::RunConfigFile;
use pricelab::harness::{self, RunResult};
use pricelab::{env, oracle, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricelabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Io = 4,
    Panic = 5,
}

/// Parsed run configuration.
pub struct PricelabConfig(RunConfigFile);

/// Outcome of one training run.
pub struct PricelabRunResult(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> PricelabStatus {
    match err {
        Error::InvalidInput(_) => PricelabStatus::InvalidInput,
        Error::Config(_) | Error::Toml(_) => PricelabStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => PricelabStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PricelabStatus>) -> PricelabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PricelabStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside pricelab");
            PricelabStatus::Panic
        }
    }
}

fn fail(err: Error) -> PricelabStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(name: &str) -> PricelabStatus {
    set_error(format!("{name} is null"));
    PricelabStatus::NullPointer
}

/// Message for the last failed call on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pricelab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pricelab_config_default(out: *mut *mut PricelabConfig) -> PricelabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(PricelabConfig(RunConfigFile::default())));
        Ok(())
    })
}

/// Parse a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_config_from_toml(
    toml: *const c_char,
    out: *mut *mut PricelabConfig,
) -> PricelabStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| {
            set_error(format!("config is not UTF-8: {e}"));
            PricelabStatus::InvalidInput
        })?;
        let cfg = RunConfigFile::parse(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(PricelabConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn pricelab_config_set_seed(cfg: *mut PricelabConfig, seed: u64) -> PricelabStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// Canonical TOML of the configuration; free with [`pricelab_string_free`].
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_config_to_toml(
    cfg: *const PricelabConfig,
    out: *mut *mut c_char,
) -> PricelabStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CString::new(cfg.0.to_canonical()).map_err(|e| {
            set_error(e.to_string());
            PricelabStatus::Config
        })?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pricelab_config_free(cfg: *mut PricelabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pricelab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Execute one training run.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_run(
    cfg: *const PricelabConfig,
    out: *mut *mut PricelabRunResult,
) -> PricelabStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let run_cfg = cfg.0.run_config().map_err(fail)?;
        let result = harness::run(&run_cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(PricelabRunResult(result)));
        Ok(())
    })
}

/// Scalar metrics of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PricelabRunSummary {
    pub total_reward: f64,
    pub final_reward: f64,
    pub greedy_eval_reward: f64,
    pub benchmark_mean: f64,
    /// 0 when the run never converged.
    pub convergence_iteration: u64,
    pub converged: bool,
    pub flushes: u64,
    pub curve_len: usize,
}

/// # Safety
/// `res` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_result_summary(
    res: *const PricelabRunResult,
    out: *mut PricelabRunSummary,
) -> PricelabStatus {
    guard(|| {
        let r = &res.as_ref().ok_or_else(|| null("res"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = PricelabRunSummary {
            total_reward: r.total_reward,
            final_reward: r.final_reward,
            greedy_eval_reward: r.greedy_eval_reward,
            benchmark_mean: r.benchmark_mean,
            convergence_iteration: r.convergence_iteration.unwrap_or(0) as u64,
            converged: r.convergence_iteration.is_some(),
            flushes: r.flushes,
            curve_len: r.curve.len(),
        };
        Ok(())
    })
}

/// Copy up to `cap` learning-curve points; `written` receives the count.
///
/// # Safety
/// `iterations` and `values` must each hold `cap` elements; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_result_curve(
    res: *const PricelabRunResult,
    iterations: *mut u64,
    values: *mut f64,
    cap: usize,
    written: *mut usize,
) -> PricelabStatus {
    guard(|| {
        let r = &res.as_ref().ok_or_else(|| null("res"))?.0;
        if iterations.is_null() || values.is_null() {
            return Err(null("output buffer"));
        }
        let written = written.as_mut().ok_or_else(|| null("written"))?;
        let n = cap.min(r.curve.len());
        for (i, p) in r.curve.iter().take(n).enumerate() {
            *iterations.add(i) = p.iteration as u64;
            *values.add(i) = p.rolling_mean_reward;
        }
        *written = n;
        Ok(())
    })
}

/// # Safety
/// `res` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pricelab_result_free(res: *mut PricelabRunResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// `beta * (1 - exp(steepness * discount))`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_purchase_probability(
    beta: f64,
    discount: f64,
    steepness: f64,
    out: *mut f64,
) -> PricelabStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = env::purchase_probability(beta, discount, steepness).map_err(fail)?;
        Ok(())
    })
}

/// Expected revenue of offering `discount` to a customer with consideration `beta`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_expected_reward(
    beta: f64,
    discount: f64,
    base_price: f64,
    steepness: f64,
    out: *mut f64,
) -> PricelabStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = oracle::expected_reward(beta, discount, base_price, steepness).map_err(fail)?;
        Ok(())
    })
}

/// Revenue-maximising discount on the continuum.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_optimal_discount(steepness: f64, out: *mut f64) -> PricelabStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = oracle::optimal_discount_continuous(steepness).map_err(fail)?;
        Ok(())
    })
}

/// Closed-form perfect-knowledge benchmark (mean over states) for a config.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pricelab_benchmark_mean(cfg: *const PricelabConfig, out: *mut f64) -> PricelabStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let env = cfg.0.env().map_err(fail)?;
        *out = oracle::benchmark_closed_form(&env).mean_optimum;
        Ok(())
    })
}
