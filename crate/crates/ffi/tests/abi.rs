use std::ffi::{c_char, CStr, CString};
use std::ptr;

use mllsgd_ffi::*;

const CONFIG: &str = r#"{
    "network": {"sub_networks": 3, "workers_per_hub": 2, "topology": "path"},
    "objective": {
        "kind": "logistic",
        "dataset": {"synthetic-logistic": {"n": 600, "dim": 4, "condition": 2.0, "signal": 2.0, "seed": 1}},
        "batch_size": 4,
        "test_fraction": 0.25
    },
    "run": {"eta": 0.2, "tau": 2, "q": 2, "steps": 32, "seed": 3, "eval_every": 8}
}"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        mllsgd_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn experiment(json: &str) -> (MllsgdStatus, *mut MllsgdExperiment) {
    let c = CString::new(json).unwrap();
    let mut exp = ptr::null_mut();
    let status = unsafe { mllsgd_experiment_new(c.as_ptr(), ptr::null(), &mut exp) };
    (status, exp)
}

#[test]
fn run_and_read_trace() {
    let (status, exp) = experiment(CONFIG);
    assert_eq!(status, MllsgdStatus::Ok, "{}", last_error());
    unsafe {
        let mut n = 0u64;
        assert_eq!(mllsgd_experiment_num_workers(exp, &mut n), MllsgdStatus::Ok);
        assert_eq!(n, 6);
        let mut zeta = -1.0;
        assert_eq!(mllsgd_experiment_zeta(exp, &mut zeta), MllsgdStatus::Ok);
        assert!(zeta > 0.0 && zeta < 1.0);

        let mut trace = ptr::null_mut();
        assert_eq!(mllsgd_experiment_run(exp, 9, &mut trace), MllsgdStatus::Ok);
        let len = mllsgd_trace_len(trace);
        assert_eq!(len, 32 / 8 + 1);
        let mut rec = std::mem::zeroed::<MllsgdRecord>();
        assert_eq!(mllsgd_trace_get(trace, len - 1, &mut rec), MllsgdStatus::Ok);
        assert_eq!(rec.k, 32);
        assert!(rec.loss_full.is_finite() && (0.0..=1.0).contains(&rec.test_acc));
        assert_eq!(rec.total_grad_steps, 6 * 32);
        assert_eq!(mllsgd_trace_get(trace, len, &mut rec), MllsgdStatus::OutOfRange);
        assert!(last_error().contains("out of range"));

        // same seed, same trace
        let mut again = ptr::null_mut();
        assert_eq!(mllsgd_experiment_run(exp, 9, &mut again), MllsgdStatus::Ok);
        let mut rec2 = std::mem::zeroed::<MllsgdRecord>();
        mllsgd_trace_get(again, len - 1, &mut rec2);
        assert_eq!(rec.loss_full.to_bits(), rec2.loss_full.to_bits());

        mllsgd_trace_free(trace);
        mllsgd_trace_free(again);
        mllsgd_experiment_free(exp);
    }
}

#[test]
fn error_codes() {
    let (status, exp) = experiment("{ not json");
    assert_eq!(status, MllsgdStatus::Config);
    assert!(exp.is_null());
    assert!(!last_error().is_empty());

    let bad_batch = CONFIG.replace("\"batch_size\": 4", "\"batch_size\": 4000");
    assert_eq!(experiment(&bad_batch).0, MllsgdStatus::Config);

    let missing = CONFIG.replace(
        r#"{"synthetic-logistic": {"n": 600, "dim": 4, "condition": 2.0, "signal": 2.0, "seed": 1}}"#,
        r#"{"idx": {"images": "/nonexistent/images", "labels": "/nonexistent/labels"}}"#,
    );
    assert_eq!(experiment(&missing).0, MllsgdStatus::Io);
    assert!(last_error().contains("/nonexistent/images"));

    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(mllsgd_experiment_new(ptr::null(), ptr::null(), &mut out), MllsgdStatus::NullPointer);
        assert_eq!(mllsgd_trace_len(ptr::null()), 0);
        mllsgd_trace_free(ptr::null_mut());
        mllsgd_experiment_free(ptr::null_mut());
    }
}

#[test]
fn gamma_and_version() {
    let (mut t, mut c) = (0.0, 0.0);
    unsafe {
        assert_eq!(mllsgd_gamma(0.0, &mut t, &mut c), MllsgdStatus::Ok);
        assert_eq!((t, c), (2.0, 3.0));
        assert_eq!(mllsgd_gamma(1.0, &mut t, &mut c), MllsgdStatus::Numerical);
        let v = CStr::from_ptr(mllsgd_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn truncated_error_message() {
    let _ = experiment("{");
    let full = unsafe { mllsgd_last_error(ptr::null_mut(), 0) };
    let mut buf = [0x7f as c_char; 5];
    let n = unsafe { mllsgd_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full);
    assert_eq!(buf[4], 0);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/mllsgd.h");
    for name in [
        "mllsgd_experiment_new",
        "mllsgd_experiment_free",
        "mllsgd_experiment_num_workers",
        "mllsgd_experiment_zeta",
        "mllsgd_experiment_run",
        "mllsgd_trace_free",
        "mllsgd_trace_len",
        "mllsgd_trace_get",
        "mllsgd_gamma",
        "mllsgd_last_error",
        "mllsgd_version",
        "MLLSGD_STATUS_DIVERGENCE",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
