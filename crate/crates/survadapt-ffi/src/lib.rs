//! C ABI for the survadapt toolkit.
//!
//! Conventions: every fallible function returns a status code (`SA_OK` on
//! success) and writes its result through out-pointers; `sa_last_error_message`
//! returns a thread-local description of the most recent failure. Handles
//! (`SaScenario`, `SaDataset`) are opaque; free them with their `_free`
//! function exactly once. All functions are panic-safe: internal invariant
//! failures surface as `SA_ERR_INTERNAL`, never as an unwind across the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use survadapt::cli::{parse_scenario_text, CliError, ParsedScenario};
use survadapt::combo_test::{combine, StagePValues, Weights};
use survadapt::cond_error::conditional_error;
use survadapt::sim_engine::{expected_events, operating_characteristics, required_events};
use survadapt::surv_core::{dataset_from_csv, snapshot, StageCensor, SubjectRecord};
use survadapt::wiener_bound::{corrected_kstar_with_knots, worst_case_alpha};

/// Success.
pub const SA_OK: i32 = 0;
/// A required pointer argument was null.
pub const SA_ERR_NULL: i32 = 1;
/// Malformed or invariant-violating input (parse and validation failures).
pub const SA_ERR_INVALID: i32 = 2;
/// A solver or special-function failure.
pub const SA_ERR_NUMERICAL: i32 = 3;
/// An event-count clock ran past the available events.
pub const SA_ERR_INSUFFICIENT_EVENTS: i32 = 4;
/// An internal invariant tripped; the message names it.
pub const SA_ERR_INTERNAL: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    let c = CString::new(sanitized).expect("nul bytes stripped");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(code: i32, msg: &str) -> i32 {
    set_error(msg);
    code
}

fn fail_with(e: CliError) -> i32 {
    set_error(&e.to_string());
    e.exit_code() as i32
}

/// Every entry point runs under this guard so a panic becomes a status code
/// instead of undefined behavior at the C boundary.
fn guarded(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(SA_ERR_INTERNAL, &format!("internal: {msg}"))
        }
    }
}

/// # Safety
/// `p` must be either null or valid for writes of `T`.
unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> i32 {
    if p.is_null() {
        return fail(SA_ERR_NULL, &format!("{name} is null"));
    }
    unsafe { p.write(value) };
    SA_OK
}

unsafe fn read_utf8<'a>(p: *const c_char, name: &str) -> Result<&'a str, i32> {
    if p.is_null() {
        return Err(fail(SA_ERR_NULL, &format!("{name} is null")));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(SA_ERR_INVALID, &format!("{name} is not valid UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, i32> {
    if p.is_null() {
        Err(fail(SA_ERR_NULL, &format!("{name} is null")))
    } else {
        Ok(unsafe { &*p })
    }
}

// ---------------------------------------------------------------------------
// handles and result structs
// ---------------------------------------------------------------------------

/// Opaque parsed scenario: configuration plus the optional adaptive rule.
pub struct SaScenario {
    parsed: ParsedScenario,
}

/// Opaque survival dataset (rows of entry, survival, arm, stage).
pub struct SaDataset {
    data: Vec<SubjectRecord>,
}

/// Monte Carlo operating characteristics of one scenario/rule combination.
#[repr(C)]
pub struct SaSummary {
    pub replications: u64,
    /// rejection rate of the weighted inverse-normal combination test
    pub combination_rate: f64,
    pub combination_se: f64,
    /// rejection rate of the uncorrected statistic at the chosen analysis
    pub naive_rate: f64,
    pub naive_se: f64,
    /// rejection rate of the naive statistic against the corrected cutoff
    pub corrected_rate: f64,
    pub corrected_se: f64,
    pub mean_d1_scheduled: f64,
    pub mean_d1_final: f64,
    pub mean_d1_tmax: f64,
    pub mean_d12_final: f64,
    pub mean_effective_info_deficit: f64,
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sa_version() -> *const c_char {
    static VERSION: &CStr = {
        const BYTES: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
        match CStr::from_bytes_with_nul(BYTES) {
            Ok(c) => c,
            Err(_) => panic!("version string contains a nul byte"),
        }
    };
    VERSION.as_ptr()
}

// ---------------------------------------------------------------------------
// scalar computations
// ---------------------------------------------------------------------------

/// Worst-case type I error of the naive level-`alpha` test when the first
/// stage may be analyzed anywhere in the information window [`u1`, 1].
/// Pass `knot_count` = 0 for the default boundary grid.
#[no_mangle]
pub extern "C" fn sa_worst_case_alpha(
    w1: f64,
    u1: f64,
    alpha: f64,
    knot_count: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let knots = if knot_count == 0 {
            survadapt::wiener_bound::DEFAULT_KNOT_COUNT
        } else {
            knot_count
        };
        match worst_case_alpha(w1, u1, alpha, knots) {
            Ok(v) => unsafe { write_out(out, v, "out") },
            Err(e) => fail_with(e.into()),
        }
    })
}

/// Corrected critical value k* that restores level `alpha` against every
/// first-stage stopping rule in [`u1`, 1]. Pass `knot_count` = 0 for the
/// default boundary grid.
#[no_mangle]
pub extern "C" fn sa_corrected_kstar(
    w1: f64,
    u1: f64,
    alpha: f64,
    knot_count: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let knots = if knot_count == 0 {
            survadapt::wiener_bound::DEFAULT_KNOT_COUNT
        } else {
            knot_count
        };
        match corrected_kstar_with_knots(w1, u1, alpha, knots) {
            Ok(v) => unsafe { write_out(out, v, "out") },
            Err(e) => fail_with(e.into()),
        }
    })
}

/// Conditional rejection probability of the planned level-`alpha` pooled
/// test given `d1_t12` first-stage events with p-value `p1` out of the
/// planned `d12`.
#[no_mangle]
pub extern "C" fn sa_conditional_error(
    p1: f64,
    d1_t12: u64,
    d12: u64,
    alpha: f64,
    out: *mut f64,
) -> i32 {
    guarded(|| match conditional_error(p1, d1_t12 as usize, d12 as usize, alpha) {
        Ok(v) => unsafe { write_out(out, v, "out") },
        Err(e) => fail_with(e.into()),
    })
}

/// Event target for a one-sided level-`alpha` logrank test with power
/// 1 - `beta` at log hazard ratio `theta_r`: the pre-rounding value goes to
/// `out_raw`, the even-rounded target to `out_count`.
#[no_mangle]
pub extern "C" fn sa_required_events(
    alpha: f64,
    beta: f64,
    theta_r: f64,
    out_count: *mut u64,
    out_raw: *mut f64,
) -> i32 {
    guarded(|| {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return fail(SA_ERR_INVALID, &format!("{name} must lie in (0,1), got {v}"));
            }
        }
        if !(theta_r > 0.0 && theta_r.is_finite()) {
            return fail(SA_ERR_INVALID, &format!("theta_r must be positive, got {theta_r}"));
        }
        let req = required_events(alpha, beta, theta_r);
        let rc = unsafe { write_out(out_raw, req.raw, "out_raw") };
        if rc != SA_OK {
            return rc;
        }
        unsafe { write_out(out_count, req.count as u64, "out_count") }
    })
}

/// Weighted inverse-normal combination of two stage p-values with weights
/// (`w1`, sqrt(1 - w1^2)).
#[no_mangle]
pub extern "C" fn sa_combine(w1: f64, p1: f64, p2: f64, out_z: *mut f64) -> i32 {
    guarded(|| {
        let w = match Weights::from_w1(w1) {
            Ok(w) => w,
            Err(e) => return fail_with(e.into()),
        };
        match combine(&w, &StagePValues { p1, p2 }) {
            Ok(z) => unsafe { write_out(out_z, z, "out_z") },
            Err(e) => fail_with(e.into()),
        }
    })
}

// ---------------------------------------------------------------------------
// scenario handle
// ---------------------------------------------------------------------------

/// Parses a scenario description (the same text format the CLI reads) into
/// an opaque handle. On success the handle is owned by the caller and must
/// be released with `sa_scenario_free`.
#[no_mangle]
pub unsafe extern "C" fn sa_scenario_parse(
    text: *const c_char,
    out: *mut *mut SaScenario,
) -> i32 {
    guarded(|| {
        let text = match unsafe { read_utf8(text, "text") } {
            Ok(t) => t,
            Err(code) => return code,
        };
        match parse_scenario_text(text) {
            Ok(parsed) => {
                let handle = Box::into_raw(Box::new(SaScenario { parsed }));
                unsafe { write_out(out, handle, "out") }
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Releases a scenario handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sa_scenario_free(scenario: *mut SaScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Calendar end of the trial: accrual months plus follow-up months.
#[no_mangle]
pub unsafe extern "C" fn sa_scenario_t_max(scenario: *const SaScenario, out: *mut f64) -> i32 {
    guarded(|| {
        let s = match unsafe { deref(scenario, "scenario") } {
            Ok(s) => s,
            Err(code) => return code,
        };
        unsafe { write_out(out, s.parsed.config.t_max(), "out") }
    })
}

/// Expected pooled event count of the scenario at calendar time `t`.
#[no_mangle]
pub unsafe extern "C" fn sa_expected_events(
    scenario: *const SaScenario,
    t: f64,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let s = match unsafe { deref(scenario, "scenario") } {
            Ok(s) => s,
            Err(code) => return code,
        };
        if !(t >= 0.0 && t.is_finite()) {
            return fail(SA_ERR_INVALID, &format!("t must be nonnegative, got {t}"));
        }
        match expected_events(&s.parsed.config, t) {
            Ok(v) => unsafe { write_out(out, v, "out") },
            Err(e) => fail_with(e.into()),
        }
    })
}

/// Runs `reps` seeded replications of the scenario under its `[rule]`
/// section and writes the operating characteristics to `out`.
#[no_mangle]
pub unsafe extern "C" fn sa_simulate_summary(
    scenario: *const SaScenario,
    reps: u64,
    seed: u64,
    out: *mut SaSummary,
) -> i32 {
    guarded(|| {
        let s = match unsafe { deref(scenario, "scenario") } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let Some(rule) = s.parsed.rule else {
            return fail(SA_ERR_INVALID, "scenario has no [rule] section");
        };
        if reps == 0 {
            return fail(SA_ERR_INVALID, "reps must be >= 1");
        }
        match operating_characteristics(&s.parsed.config, rule, reps as usize, seed) {
            Ok(sm) => unsafe {
                write_out(
                    out,
                    SaSummary {
                        replications: sm.replications as u64,
                        combination_rate: sm.combination_rate,
                        combination_se: sm.combination_se,
                        naive_rate: sm.naive_rate,
                        naive_se: sm.naive_se,
                        corrected_rate: sm.corrected_rate,
                        corrected_se: sm.corrected_se,
                        mean_d1_scheduled: sm.mean_d1_scheduled,
                        mean_d1_final: sm.mean_d1_final,
                        mean_d1_tmax: sm.mean_d1_tmax,
                        mean_d12_final: sm.mean_d12_final,
                        mean_effective_info_deficit: sm.mean_effective_info_deficit,
                    },
                    "out",
                )
            },
            Err(e) => fail_with(e.into()),
        }
    })
}

// ---------------------------------------------------------------------------
// dataset handle
// ---------------------------------------------------------------------------

/// Parses a dataset CSV (header `entry,surv,arm,stage`, arm C|E, stage 1|2)
/// into an opaque handle owned by the caller; release with `sa_dataset_free`.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_parse_csv(
    text: *const c_char,
    out: *mut *mut SaDataset,
) -> i32 {
    guarded(|| {
        let text = match unsafe { read_utf8(text, "text") } {
            Ok(t) => t,
            Err(code) => return code,
        };
        match dataset_from_csv(text) {
            Ok(data) => {
                let handle = Box::into_raw(Box::new(SaDataset { data }));
                unsafe { write_out(out, handle, "out") }
            }
            Err(e) => fail_with(e.into()),
        }
    })
}

/// Releases a dataset handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_free(dataset: *mut SaDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Number of subject rows in the dataset.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_len(dataset: *const SaDataset, out: *mut u64) -> i32 {
    guarded(|| {
        let d = match unsafe { deref(dataset, "dataset") } {
            Ok(d) => d,
            Err(code) => return code,
        };
        unsafe { write_out(out, d.data.len() as u64, "out") }
    })
}

/// Pooled logrank snapshot at calendar time `t`: event count to
/// `out_events`, score to `out_score`.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_logrank(
    dataset: *const SaDataset,
    t: f64,
    out_events: *mut u64,
    out_score: *mut f64,
) -> i32 {
    guarded(|| {
        let d = match unsafe { deref(dataset, "dataset") } {
            Ok(d) => d,
            Err(code) => return code,
        };
        if !t.is_finite() {
            return fail(SA_ERR_INVALID, &format!("t must be finite, got {t}"));
        }
        let snap = snapshot(&d.data, t, StageCensor::NONE);
        let rc = unsafe { write_out(out_events, snap.d_events as u64, "out_events") };
        if rc != SA_OK {
            return rc;
        }
        unsafe { write_out(out_score, snap.score, "out_score") }
    })
}

// ---------------------------------------------------------------------------
