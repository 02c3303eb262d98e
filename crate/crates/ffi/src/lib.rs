//! C ABI over the simulator.
//!
//! Handles are opaque heap objects created by `*_new`/`*_run` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`MllsgdStatus`]; the message of the most recent failure on the calling
//! thread is available from [`mllsgd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mllsgd::cli::{build_experiment, ConfigFile, Experiment};
use mllsgd::engine::TraceRecord;
use mllsgd::harness;
use mllsgd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MllsgdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Network = 4,
    Objective = 5,
    Divergence = 6,
    Numerical = 7,
    Io = 8,
    OutOfRange = 9,
    Panic = 10,
}

impl From<&Error> for MllsgdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => MllsgdStatus::Config,
            Error::InvalidNetwork(_) | Error::Disconnected { .. } | Error::InvalidHubMatrix(_) => MllsgdStatus::Network,
            Error::Objective(_) | Error::Dimension(_) | Error::Idx { .. } => MllsgdStatus::Objective,
            Error::Divergence { .. } => MllsgdStatus::Divergence,
            Error::Eigen(_) | Error::Bound(_) => MllsgdStatus::Numerical,
            Error::Io { .. } => MllsgdStatus::Io,
        }
    }
}

/// A configured experiment.
pub struct MllsgdExperiment {
    inner: Experiment,
}

/// The evaluation records of one run.
pub struct MllsgdTrace {
    records: Vec<TraceRecord>,
}

/// One evaluation record. `test_acc` is NaN when no test set is configured.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MllsgdRecord {
    pub k: u64,
    pub time_slot: u64,
    pub loss_full: f64,
    pub grad_norm_sq: f64,
    pub consensus_err: f64,
    pub test_acc: f64,
    /// Gradient steps taken by all workers so far.
    pub total_grad_steps: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: MllsgdStatus, msg: impl Into<String>) -> MllsgdStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> MllsgdStatus) -> MllsgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MllsgdStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, MllsgdStatus> {
    if p.is_null() {
        return Err(fail(MllsgdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MllsgdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Parses a JSON config and builds an experiment. Relative dataset paths
/// resolve against `base_dir`, which may be null for the working directory.
///
/// # Safety
/// `config_json` must be a NUL-terminated string, `base_dir` null or a
/// NUL-terminated string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_experiment_new(
    config_json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut MllsgdExperiment,
) -> MllsgdStatus {
    guard(|| {
        if out.is_null() {
            return fail(MllsgdStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let json = match read_str(config_json, "config_json") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let base = if base_dir.is_null() {
            "."
        } else {
            match read_str(base_dir, "base_dir") {
                Ok(s) => s,
                Err(s) => return s,
            }
        };
        match ConfigFile::parse(json).and_then(|c| build_experiment(&c, Path::new(base))) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MllsgdExperiment { inner }));
                MllsgdStatus::Ok
            }
            Err(e) => fail((&e).into(), e.to_string()),
        }
    })
}

/// # Safety
/// `exp` must be null or a handle from [`mllsgd_experiment_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_experiment_free(exp: *mut MllsgdExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Number of workers in the network.
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_experiment_num_workers(exp: *const MllsgdExperiment, out: *mut u64) -> MllsgdStatus {
    guard(|| {
        if exp.is_null() || out.is_null() {
            return fail(MllsgdStatus::NullPointer, "null argument");
        }
        *out = (*exp).inner.net.num_workers() as u64;
        MllsgdStatus::Ok
    })
}

/// Spectral quantity of the hub matrix in use.
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_experiment_zeta(exp: *const MllsgdExperiment, out: *mut f64) -> MllsgdStatus {
    guard(|| {
        if exp.is_null() || out.is_null() {
            return fail(MllsgdStatus::NullPointer, "null argument");
        }
        match (*exp).inner.resolved() {
            Ok((_, mixing)) => {
                *out = mixing.zeta;
                MllsgdStatus::Ok
            }
            Err(e) => fail((&e).into(), e.to_string()),
        }
    })
}

/// Runs the experiment with `seed` replacing the configured seed.
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_experiment_run(
    exp: *const MllsgdExperiment,
    seed: u64,
    out: *mut *mut MllsgdTrace,
) -> MllsgdStatus {
    guard(|| {
        if exp.is_null() || out.is_null() {
            return fail(MllsgdStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let exp = &(*exp).inner;
        let cfg = mllsgd::engine::SimConfig { seed, ..exp.cfg.clone() };
        let spec = harness::RunSpec { cfg: &cfg, ..exp.spec() };
        match harness::run_preset(&spec) {
            Ok(trace) => {
                *out = Box::into_raw(Box::new(MllsgdTrace { records: trace.records }));
                MllsgdStatus::Ok
            }
            Err(e) => fail((&e).into(), e.to_string()),
        }
    })
}

/// # Safety
/// `trace` must be null or a handle from [`mllsgd_experiment_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_trace_free(trace: *mut MllsgdTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of records in a trace; 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_trace_len(trace: *const MllsgdTrace) -> u64 {
    if trace.is_null() {
        0
    } else {
        (*trace).records.len() as u64
    }
}

/// Copies record `index` into `out`.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_trace_get(
    trace: *const MllsgdTrace,
    index: u64,
    out: *mut MllsgdRecord,
) -> MllsgdStatus {
    guard(|| {
        if trace.is_null() || out.is_null() {
            return fail(MllsgdStatus::NullPointer, "null argument");
        }
        let records = &(*trace).records;
        let Some(r) = usize::try_from(index).ok().and_then(|i| records.get(i)) else {
            return fail(
                MllsgdStatus::OutOfRange,
                format!("record {index} out of range for {} records", records.len()),
            );
        };
        *out = MllsgdRecord {
            k: r.k as u64,
            time_slot: r.time_slot as u64,
            loss_full: r.loss_full,
            grad_norm_sq: r.grad_norm_sq,
            consensus_err: r.consensus_err,
            test_acc: r.test_acc.unwrap_or(f64::NAN),
            total_grad_steps: r.grad_steps.iter().sum(),
        };
        MllsgdStatus::Ok
    })
}

/// Both forms of the mixing constant for a given `zeta`.
///
/// # Safety
/// `tight` and `conservative` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_gamma(zeta: f64, tight: *mut f64, conservative: *mut f64) -> MllsgdStatus {
    guard(|| {
        if tight.is_null() || conservative.is_null() {
            return fail(MllsgdStatus::NullPointer, "null argument");
        }
        match mllsgd::bounds::gamma(zeta) {
            Ok(g) => {
                *tight = g.tight;
                *conservative = g.conservative;
                MllsgdStatus::Ok
            }
            Err(e) => fail((&e).into(), e.to_string()),
        }
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mllsgd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mllsgd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
