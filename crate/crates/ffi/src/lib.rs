//! C ABI over the optimizer and the scenario runner.
//!
//! Two opaque handles are exported:
//!
//! * `CaoAgent` — one robot's optimizer, for hosts that own the testbed and
//!   the global cost themselves. Per iteration the host hands in the
//!   discrepancy and reads back the next decision.
//! * `CaoRun` — a whole scenario described by a TOML document, executed to
//!   completion inside the library.
//!
//! Every function returns a [`CaoStatus`]; on failure the message is kept
//! per thread and can be read with [`cao_last_error_message`]. Handles must
//! be released with their `_free` function; null handles are rejected, never
//! dereferenced. Panics are caught at the boundary and reported as
//! `CAO_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cao_swarm::harness::{run_scenario, write_artifacts, RunArtifacts, ScenarioConfig};
use cao_swarm::{Agent, AgentConfig, Error};

/// Result of every exported call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed configuration or arguments.
    Config = 3,
    /// The algorithm broke one of its own guarantees (constraint violation,
    /// protocol misuse, non-finite value).
    InvariantBreach = 4,
    /// The caller's buffer is shorter than the data; the required length is
    /// still reported.
    BufferTooSmall = 5,
    /// A query needs a finished run.
    NotExecuted = 6,
    OutOfRange = 7,
    Io = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: CaoStatus, message: impl Into<String>) -> CaoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn from_error(e: Error) -> CaoStatus {
    let status = match &e {
        Error::Io(_) => CaoStatus::Io,
        e if e.is_invariant_breach() => CaoStatus::InvariantBreach,
        _ => CaoStatus::Config,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> CaoStatus) -> CaoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CaoStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, CaoStatus> {
    if ptr.is_null() {
        return Err(fail(CaoStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| fail(CaoStatus::InvalidUtf8, "string is not UTF-8"))
}

/// Copies `data` into `buf` (capacity `len`) and reports the full length in
/// `written`.
unsafe fn copy_out(data: &[f64], buf: *mut f64, len: usize, written: *mut usize) -> CaoStatus {
    if !written.is_null() {
        *written = data.len();
    }
    if data.len() > len {
        return fail(CaoStatus::BufferTooSmall, format!("need {} values, buffer holds {len}", data.len()));
    }
    if data.is_empty() {
        return CaoStatus::Ok;
    }
    if buf.is_null() {
        return fail(CaoStatus::NullPointer, "null output buffer");
    }
    std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    CaoStatus::Ok
}

/// Length in bytes of the last error message on this thread, without the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn cao_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf` and returns the number of bytes written without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cao_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cao_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// One robot's optimizer.
pub struct CaoAgent {
    inner: Agent,
}

/// Host predicate for candidate decisions: return true if the robot may move
/// to `x` (of length `dim`).
pub type CaoAdmitFn = Option<unsafe extern "C" fn(x: *const f64, dim: usize, user_data: *mut c_void) -> bool>;

/// Creates an agent at `x0` (length `dim`). `config_toml` holds the agent
/// settings (`window`, `perturbations`, `regressor`, `step`, ...); null
/// selects the defaults.
///
/// # Safety
/// `x0` must point to `dim` readable doubles, `config_toml` must be null or a
/// NUL-terminated string, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cao_agent_new(
    id: usize,
    x0: *const f64,
    dim: usize,
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut CaoAgent,
) -> CaoStatus {
    guard(|| {
        if x0.is_null() || out.is_null() {
            return fail(CaoStatus::NullPointer, "null argument");
        }
        let config = if config_toml.is_null() {
            AgentConfig::default()
        } else {
            let text = match read_str(config_toml) {
                Ok(t) => t,
                Err(s) => return s,
            };
            match toml::from_str::<AgentConfig>(text) {
                Ok(c) => c,
                Err(e) => return fail(CaoStatus::Config, format!("agent config: {e}")),
            }
        };
        let x = std::slice::from_raw_parts(x0, dim).to_vec();
        match Agent::new(id, x, config, seed) {
            Ok(agent) => {
                *out = Box::into_raw(Box::new(CaoAgent { inner: agent }));
                CaoStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases an agent. Null is a no-op.
///
/// # Safety
/// `agent` must come from [`cao_agent_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cao_agent_free(agent: *mut CaoAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Anchors the agent's subcost at the current global cost. Call once before
/// the first iteration and again after reactivation.
///
/// # Safety
/// `agent` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cao_agent_join(agent: *mut CaoAgent, global_cost: f64) -> CaoStatus {
    guard(|| match agent.as_mut() {
        None => fail(CaoStatus::NullPointer, "null agent"),
        Some(_) if !global_cost.is_finite() => fail(CaoStatus::InvariantBreach, "non-finite global cost"),
        Some(a) => {
            a.inner.join(global_cost);
            CaoStatus::Ok
        }
    })
}

/// Marks the agent active or inactive; an inactive agent keeps its decision.
///
/// # Safety
/// `agent` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cao_agent_set_active(agent: *mut CaoAgent, active: bool) -> CaoStatus {
    guard(|| match agent.as_mut() {
        None => fail(CaoStatus::NullPointer, "null agent"),
        Some(a) => {
            a.inner.set_active(active);
            CaoStatus::Ok
        }
    })
}

/// One decision step at iteration `k` given this robot's discrepancy. The
/// next decision is written to `next` (capacity `len`). A null `admit`
/// accepts every candidate.
///
/// # Safety
/// `agent` must be a live handle, `next` must hold `len` doubles, and
/// `admit` (if set) must be safe to call with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn cao_agent_iterate(
    agent: *mut CaoAgent,
    delta: f64,
    k: usize,
    admit: CaoAdmitFn,
    user_data: *mut c_void,
    next: *mut f64,
    len: usize,
) -> CaoStatus {
    guard(|| {
        let Some(a) = agent.as_mut() else {
            return fail(CaoStatus::NullPointer, "null agent");
        };
        let outcome = a.inner.iterate(delta, k, |x| match admit {
            Some(f) => f(x.as_ptr(), x.len(), user_data),
            None => true,
        });
        match outcome {
            Ok(o) => copy_out(o.next.as_slice(), next, len, std::ptr::null_mut()),
            Err(e) => from_error(e),
        }
    })
}

/// Copies the current decision into `buf`.
///
/// # Safety
/// `agent` must be a live handle, `buf` must hold `len` doubles and
/// `written` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cao_agent_decision(
    agent: *const CaoAgent,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> CaoStatus {
    guard(|| match agent.as_ref() {
        None => fail(CaoStatus::NullPointer, "null agent"),
        Some(a) => copy_out(a.inner.decision().as_slice(), buf, len, written),
    })
}

/// A scenario and, once executed, its results.
pub struct CaoRun {
    config: ScenarioConfig,
    artifacts: Option<RunArtifacts>,
}

impl CaoRun {
    fn artifacts(&self) -> Result<&RunArtifacts, CaoStatus> {
        self.artifacts.as_ref().ok_or_else(|| fail(CaoStatus::NotExecuted, "run not executed"))
    }
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `scenario_toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cao_run_new(scenario_toml: *const c_char, out: *mut *mut CaoRun) -> CaoStatus {
    guard(|| {
        if out.is_null() {
            return fail(CaoStatus::NullPointer, "null output handle");
        }
        let text = match read_str(scenario_toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let config = match ScenarioConfig::from_toml_str(text).and_then(|c| c.resolved().map(|_| c)) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        *out = Box::into_raw(Box::new(CaoRun { config, artifacts: None }));
        CaoStatus::Ok
    })
}

/// Releases a run. Null is a no-op.
///
/// # Safety
/// `run` must come from [`cao_run_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cao_run_free(run: *mut CaoRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Replaces the scenario seed; discards earlier results.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cao_run_set_seed(run: *mut CaoRun, seed: u64) -> CaoStatus {
    guard(|| match run.as_mut() {
        None => fail(CaoStatus::NullPointer, "null run"),
        Some(r) => {
            r.config.seed = seed;
            r.artifacts = None;
            CaoStatus::Ok
        }
    })
}

/// Executes the scenario to completion.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cao_run_execute(run: *mut CaoRun) -> CaoStatus {
    guard(|| {
        let Some(r) = run.as_mut() else {
            return fail(CaoStatus::NullPointer, "null run");
        };
        match run_scenario(&r.config) {
            Ok(a) => {
                r.artifacts = Some(a);
                CaoStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of recorded iterations.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cao_run_iterations(run: *const CaoRun, out: *mut usize) -> CaoStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(CaoStatus::NullPointer, "null argument");
        };
        match r.artifacts() {
            Ok(a) => {
                *out = a.records.len();
                CaoStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Global cost measured at iteration `k`.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cao_run_cost(run: *const CaoRun, k: usize, out: *mut f64) -> CaoStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(CaoStatus::NullPointer, "null argument");
        };
        let a = match r.artifacts() {
            Ok(a) => a,
            Err(s) => return s,
        };
        match a.records.get(k) {
            Some(rec) => {
                *out = rec.global_cost;
                CaoStatus::Ok
            }
            None => fail(CaoStatus::OutOfRange, format!("iteration {k} of {}", a.records.len())),
        }
    })
}

/// Final decision of robot `robot` after the last iteration.
///
/// # Safety
/// `run` must be a live handle, `buf` must hold `len` doubles and `written`
/// must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cao_run_final_position(
    run: *const CaoRun,
    robot: usize,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> CaoStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(CaoStatus::NullPointer, "null run");
        };
        let a = match r.artifacts() {
            Ok(a) => a,
            Err(s) => return s,
        };
        match a.final_positions.get(robot) {
            Some(x) => copy_out(x, buf, len, written),
            None => fail(CaoStatus::OutOfRange, format!("robot {robot} of {}", a.final_positions.len())),
        }
    })
}

/// Writes the run's artifact files (metrics, trajectory, summary, ...) into
/// `dir`, creating it if needed.
///
/// # Safety
/// `run` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cao_run_write_artifacts(run: *const CaoRun, dir: *const c_char) -> CaoStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(CaoStatus::NullPointer, "null run");
        };
        let dir = match read_str(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match r.artifacts() {
            Ok(a) => write_artifacts(a, Path::new(dir)).map_or_else(from_error, |()| CaoStatus::Ok),
            Err(s) => s,
        }
    })
}
