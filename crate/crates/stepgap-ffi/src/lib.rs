//! C ABI over the stepgap core: an opaque checker handle plus JSON bridges
//! for verdicts, trajectory rewards, and metrics reports.
//!
//! Conventions:
//! - Every fallible function returns [`SgStatus`] and reports details through
//!   `sg_last_error_message`, which is thread-local and valid until the next
//!   failing `sg_*` call on the same thread.
//! - Strings returned through `char **` out-parameters are allocated by this
//!   library and must be released with `sg_string_free`.
//! - Structured payloads cross the boundary as UTF-8 JSON in the same schemas
//!   the `stepgap` CLI reads and writes (trace records, verdicts, step
//!   predictions, reward breakdowns, metrics reports).
//!
//! The generated header lives at `include/stepgap.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use stepgap::checker::{check_trace, CheckError, JudgeSet};
use stepgap::judge::http::{HttpLlmJudge, HttpNli};
use stepgap::judge::scripted::{ScriptedLlmJudge, ScriptedNli};
use stepgap::judge::{CalibratedNli, JudgeConfig, JudgeError, LlmJudge, NliBackend};
use stepgap::metrics::{
    compute_report, qf1_trap_curve, CorrectnessMap, MetricsError, ReportConfig, StepPrediction,
};
use stepgap::reward::{trajectory_return, RewardConfig, RewardError};
use stepgap::trace::{parse_trace, token_f1, TraceRecord};
use stepgap::{CheckerVariant, GapVerdict, VariantName};

/// Result of every fallible `sg_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A JSON payload, trace, or replay script failed to parse or validate.
    MalformedInput = 3,
    /// A configuration value is out of range or inconsistent.
    ConfigError = 4,
    /// A judge backend is unreachable, failed calibration, or has no script
    /// entry for a request.
    JudgeUnavailable = 5,
    /// An internal invariant failed; the process state is still sound.
    InternalError = 6,
}

/// Opaque handle pairing a checker variant with its judge backends.
pub struct SgChecker {
    variant: CheckerVariant,
    judges: JudgeSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(text).expect("NUL stripped above"));
    });
}

fn fail(status: SgStatus, msg: impl std::fmt::Display) -> SgStatus {
    set_last_error(msg);
    status
}

fn judge_status(e: &JudgeError) -> SgStatus {
    match e {
        JudgeError::Unavailable(_)
        | JudgeError::CalibrationFailed(_)
        | JudgeError::ScriptExhausted(_) => SgStatus::JudgeUnavailable,
        JudgeError::SchemaViolation(_) => SgStatus::MalformedInput,
    }
}

fn check_status(e: &CheckError) -> SgStatus {
    match e {
        CheckError::Judge(j) => judge_status(j),
        CheckError::Trace(_) => SgStatus::MalformedInput,
        CheckError::InvalidVariant(_) => SgStatus::ConfigError,
    }
}

fn reward_status(e: &RewardError) -> SgStatus {
    match e {
        RewardError::InvalidConfig(_) => SgStatus::ConfigError,
        _ => SgStatus::MalformedInput,
    }
}

fn metrics_status(e: &MetricsError) -> SgStatus {
    match e {
        MetricsError::DomainError(_) => SgStatus::ConfigError,
        _ => SgStatus::MalformedInput,
    }
}

/// Absorb panics so they never unwind across the C boundary.
fn guarded(f: impl FnOnce() -> SgStatus) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SgStatus::InternalError, format!("internal panic: {msg}"))
        }
    }
}

/// Borrow a required C string argument as UTF-8.
///
/// # Safety
/// `ptr`, when non-null, must point to a NUL-terminated string valid for the
/// duration of the call.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, SgStatus> {
    if ptr.is_null() {
        return Err(fail(SgStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(SgStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// Like [`required_str`] but a null pointer means "use the default".
///
/// # Safety
/// As [`required_str`].
unsafe fn optional_str<'a>(
    ptr: *const c_char,
    name: &str,
) -> Result<Option<&'a str>, SgStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    required_str(ptr, name).map(Some)
}

fn write_string(out: *mut *mut c_char, value: String) -> SgStatus {
    match CString::new(value) {
        Ok(c) => {
            // SAFETY: the caller guaranteed `out` is a valid writable slot;
            // null was rejected before reaching here.
            unsafe { *out = c.into_raw() };
            SgStatus::Ok
        }
        Err(_) => fail(
            SgStatus::InternalError,
            "output string contains an interior NUL byte",
        ),
    }
}

fn to_json<T: serde::Serialize>(value: &T, out: *mut *mut c_char) -> SgStatus {
    match serde_json::to_string(value) {
        Ok(json) => write_string(out, json),
        Err(e) => fail(SgStatus::InternalError, format!("serialization failed: {e}")),
    }
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str, name: &str) -> Result<T, SgStatus> {
    serde_json::from_str(text)
        .map_err(|e| fail(SgStatus::MalformedInput, format!("{name}: {e}")))
}

fn parse_variant(name: &str) -> Result<CheckerVariant, SgStatus> {
    let parsed: VariantName = name
        .parse()
        .map_err(|e: String| fail(SgStatus::ConfigError, e))?;
    Ok(CheckerVariant::new(parsed))
}

fn install_checker(
    variant: CheckerVariant,
    llm: Arc<dyn LlmJudge>,
    nli: Arc<dyn NliBackend>,
    judge_config: &JudgeConfig,
    out: *mut *mut SgChecker,
) -> SgStatus {
    let calibrated = match CalibratedNli::calibrate(nli, judge_config) {
        Ok(c) => c,
        Err(e) => return fail(judge_status(&e), e),
    };
    let checker = Box::new(SgChecker {
        variant,
        judges: JudgeSet::new(llm, Arc::new(calibrated)),
    });
    // SAFETY: the caller guaranteed `out` is a valid writable slot.
    unsafe { *out = Box::into_raw(checker) };
    SgStatus::Ok
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread, or null if no
/// `sg_*` call has failed yet. The pointer stays valid until the next failing
/// call on this thread; do not free it.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Release a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must be null or a pointer previously returned by this library through
/// an out-parameter, not yet freed. Passing any other pointer is undefined
/// behavior.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if s.is_null() {
        return;
    }
    // SAFETY: per the contract above, `s` came from CString::into_raw.
    let _ = CString::from_raw(s);
}

/// Bag-of-words token F1 between two answer strings, written to `out`.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings and `out` a valid writable
/// double, all valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn sg_token_f1(
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SgStatus::NullPointer, "out is null");
        }
        let a = match required_str(a, "a") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let b = match required_str(b, "b") {
            Ok(s) => s,
            Err(status) => return status,
        };
        *out = token_f1(a, b);
        SgStatus::Ok
    })
}

/// The flag-everything question-level F1 identity, element-wise over `w`:
/// `qf1[i] = 2*w[i] / (1 + w[i])`. Each `w[i]` must lie in (0, 1].
///
/// # Safety
/// `w` and `out` must point to arrays of at least `len` doubles, valid for
/// the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn sg_qf1_trap_curve(
    w: *const f64,
    len: usize,
    out: *mut f64,
) -> SgStatus {
    guarded(|| {
        if len > 0 && (w.is_null() || out.is_null()) {
            return fail(SgStatus::NullPointer, "w or out is null");
        }
        let input = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(w, len)
        };
        match qf1_trap_curve(input) {
            Ok(values) => {
                for (i, v) in values.iter().enumerate() {
                    *out.add(i) = *v;
                }
                SgStatus::Ok
            }
            Err(e) => fail(metrics_status(&e), e),
        }
    })
}

/// Build a checker over scripted replay judges.
///
/// `variant` is a checker variant name (`stepgap`, `llm-strict`, `llm-only`,
/// `single-llm-xl`, `nli-only`, `flag-everything`). The two paths name JSONL
/// replay scripts; the NLI script must include the label-calibration probe
/// entries or construction fails with `SG_STATUS_JUDGE_UNAVAILABLE`.
///
/// # Safety
/// All three strings must be NUL-terminated and `out` a valid writable slot,
/// all valid for the duration of the call. On success the caller owns the
/// handle and must release it with `sg_checker_free`.
#[no_mangle]
pub unsafe extern "C" fn sg_checker_new_scripted(
    variant: *const c_char,
    llm_script_path: *const c_char,
    nli_script_path: *const c_char,
    out: *mut *mut SgChecker,
) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SgStatus::NullPointer, "out is null");
        }
        let variant = match required_str(variant, "variant").and_then(|s| parse_variant(s)) {
            Ok(v) => v,
            Err(status) => return status,
        };
        let llm_path = match required_str(llm_script_path, "llm_script_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let nli_path = match required_str(nli_script_path, "nli_script_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let llm = match ScriptedLlmJudge::load(Path::new(llm_path)) {
            Ok(j) => Arc::new(j) as Arc<dyn LlmJudge>,
            Err(e) => return fail(judge_status(&e), e),
        };
        let nli = match ScriptedNli::load(Path::new(nli_path)) {
            Ok(n) => Arc::new(n) as Arc<dyn NliBackend>,
            Err(e) => return fail(judge_status(&e), e),
        };
        install_checker(variant, llm, nli, &JudgeConfig::default(), out)
    })
}

/// Build a checker over the HTTP judge backends.
///
/// `judge_config_json` configures endpoints, model names, timeouts, and
/// thresholds; null means the built-in defaults. Construction performs the
/// NLI label-calibration probes, so the NLI endpoint must be reachable.
///
/// # Safety
/// `variant` and (when non-null) `judge_config_json` must be NUL-terminated
/// strings and `out` a valid writable slot, all valid for the duration of the
/// call. On success the caller owns the handle and must release it with
/// `sg_checker_free`.
#[no_mangle]
pub unsafe extern "C" fn sg_checker_new_http(
    variant: *const c_char,
    judge_config_json: *const c_char,
    out: *mut *mut SgChecker,
) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SgStatus::NullPointer, "out is null");
        }
        let variant = match required_str(variant, "variant").and_then(|s| parse_variant(s)) {
            Ok(v) => v,
            Err(status) => return status,
        };
        let config: JudgeConfig = match optional_str(judge_config_json, "judge_config_json") {
            Ok(Some(text)) => match from_json(text, "judge_config_json") {
                Ok(c) => c,
                Err(status) => return status,
            },
            Ok(None) => JudgeConfig::default(),
            Err(status) => return status,
        };
        if let Err(e) = config.validate() {
            return fail(SgStatus::ConfigError, e);
        }
        let llm = match HttpLlmJudge::new(&config) {
            Ok(j) => Arc::new(j) as Arc<dyn LlmJudge>,
            Err(e) => return fail(judge_status(&e), e),
        };
        let nli = match HttpNli::new(&config) {
            Ok(n) => Arc::new(n) as Arc<dyn NliBackend>,
            Err(e) => return fail(judge_status(&e), e),
        };
        install_checker(variant, llm, nli, &config, out)
    })
}

/// Release a checker handle.
///
/// # Safety
/// `checker` must be null or a handle from `sg_checker_new_*`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_checker_free(checker: *mut SgChecker) {
    if checker.is_null() {
        return;
    }
    // SAFETY: per the contract above, the pointer came from Box::into_raw.
    drop(Box::from_raw(checker));
}

/// Check every step of one trace record.
///
/// `trace_record_json` is a single benchmark record (the schema of one
/// `benchmark.jsonl` line). On success `out_verdicts_json` receives a JSON
/// array with one gap verdict per step, in step order.
///
/// # Safety
/// `checker` must be a live handle from `sg_checker_new_*`;
/// `trace_record_json` must be a NUL-terminated string; `out_verdicts_json`
/// must be a valid writable slot. The returned string must be released with
/// `sg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sg_checker_check_trace(
    checker: *const SgChecker,
    trace_record_json: *const c_char,
    out_verdicts_json: *mut *mut c_char,
) -> SgStatus {
    guarded(|| {
        if checker.is_null() {
            return fail(SgStatus::NullPointer, "checker is null");
        }
        if out_verdicts_json.is_null() {
            return fail(SgStatus::NullPointer, "out_verdicts_json is null");
        }
        // SAFETY: per the contract above, the handle is live and unaliased by
        // a concurrent free.
        let checker = &*checker;
        let text = match required_str(trace_record_json, "trace_record_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let record: TraceRecord = match from_json(text, "trace_record_json") {
            Ok(r) => r,
            Err(status) => return status,
        };
        let trace = match parse_trace(&record) {
            Ok(t) => t,
            Err(e) => return fail(SgStatus::MalformedInput, e),
        };
        match check_trace(&trace, &checker.variant, &checker.judges) {
            Ok(verdicts) => to_json(&verdicts, out_verdicts_json),
            Err(e) => fail(check_status(&e), e),
        }
    })
}

/// Compute the typed process reward for one trajectory.
///
/// `verdicts_json` is the array produced by `sg_checker_check_trace` for the
/// same trace; `reward_config_json` configures the reward table and shaping
/// terms, null meaning the built-in defaults. On success
/// `out_breakdown_json` receives the full reward breakdown record.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_breakdown_json` must be a
/// valid writable slot. The returned string must be released with
/// `sg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sg_trajectory_return(
    verdicts_json: *const c_char,
    trace_record_json: *const c_char,
    reward_config_json: *const c_char,
    out_breakdown_json: *mut *mut c_char,
) -> SgStatus {
    guarded(|| {
        if out_breakdown_json.is_null() {
            return fail(SgStatus::NullPointer, "out_breakdown_json is null");
        }
        let verdicts_text = match required_str(verdicts_json, "verdicts_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let trace_text = match required_str(trace_record_json, "trace_record_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = match optional_str(reward_config_json, "reward_config_json") {
            Ok(Some(text)) => match from_json::<RewardConfig>(text, "reward_config_json") {
                Ok(c) => c,
                Err(status) => return status,
            },
            Ok(None) => RewardConfig::default(),
            Err(status) => return status,
        };
        let verdicts: Vec<GapVerdict> = match from_json(verdicts_text, "verdicts_json") {
            Ok(v) => v,
            Err(status) => return status,
        };
        let record: TraceRecord = match from_json(trace_text, "trace_record_json") {
            Ok(r) => r,
            Err(status) => return status,
        };
        let trace = match parse_trace(&record) {
            Ok(t) => t,
            Err(e) => return fail(SgStatus::MalformedInput, e),
        };
        let taus: Vec<_> = verdicts.iter().map(|v| v.gap_type).collect();
        match trajectory_return(&taus, &trace, &config) {
            Ok(breakdown) => to_json(&breakdown, out_breakdown_json),
            Err(e) => fail(reward_status(&e), e),
        }
    })
}

/// Compute the full metrics report from step predictions.
///
/// `predictions_json` is a JSON array of step-prediction records
/// (`question_id`, `step_index`, `predicted`, optional `gold`, `unchecked`);
/// `correctness_json` maps question ids to `true`/`false`/`null` answer
/// outcomes; `report_config_json` configures bootstrap resampling, null
/// meaning the built-in defaults.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_report_json` must be a valid
/// writable slot. The returned string must be released with `sg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sg_metrics_report(
    predictions_json: *const c_char,
    correctness_json: *const c_char,
    report_config_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> SgStatus {
    guarded(|| {
        if out_report_json.is_null() {
            return fail(SgStatus::NullPointer, "out_report_json is null");
        }
        let preds_text = match required_str(predictions_json, "predictions_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let correctness_text = match required_str(correctness_json, "correctness_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = match optional_str(report_config_json, "report_config_json") {
            Ok(Some(text)) => match from_json::<ReportConfig>(text, "report_config_json") {
                Ok(c) => c,
                Err(status) => return status,
            },
            Ok(None) => ReportConfig::default(),
            Err(status) => return status,
        };
        let preds: Vec<StepPrediction> = match from_json(preds_text, "predictions_json") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let correctness: CorrectnessMap = match from_json(correctness_text, "correctness_json")
        {
            Ok(c) => c,
            Err(status) => return status,
        };
        match compute_report(&preds, &correctness, &config) {
            Ok(report) => to_json(&report, out_report_json),
            Err(e) => fail(metrics_status(&e), e),
        }
    })
}
