use std::ffi::{CStr, CString};
use std::ptr;

use geobench_ffi::*;

const TINY: &str = r#"{"schema_version": 1, "protocol": "echo",
  "setup": {"duration_s": 2, "warmup_s": 0.5, "client_timeout_s": 1,
            "arrival": {"mode": "open", "rate": 100}}}"#;

fn last_error() -> String {
    let p = gb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    gb_string_free(s);
    out
}

#[test]
fn run_lifecycle() {
    let cfg = CString::new(TINY).unwrap();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(gb_run_new(cfg.as_ptr(), &mut run), GbStatus::Ok);
        let mut tps = 0.0;
        assert_eq!(gb_run_committed_tps(run, &mut tps), GbStatus::InvalidState);
        assert!(last_error().contains("not been executed"));
        assert_eq!(gb_run_execute(run), GbStatus::Ok);
        assert_eq!(gb_run_execute(run), GbStatus::InvalidState);
        assert_eq!(gb_run_committed_tps(run, &mut tps), GbStatus::Ok);
        assert!((tps - 100.0).abs() < 1e-9, "{tps}");
        let mut json = ptr::null_mut();
        assert_eq!(gb_run_report_json(run, &mut json), GbStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(report["protocol"], "echo");
        assert_eq!(report["totals"]["committed"], report["totals"]["submitted"]);
        gb_run_free(run);
    }
}

#[test]
fn bad_config_reports_schema_error() {
    let cfg = CString::new(r#"{"schema_version": 1, "setup": {"regoins": 3}}"#).unwrap();
    let mut run = ptr::null_mut();
    let s = unsafe { gb_run_new(cfg.as_ptr(), &mut run) };
    assert_eq!(s, GbStatus::ConfigError);
    assert!(run.is_null());
    assert!(last_error().contains("unknown field `regoins`"));
}

#[test]
fn unknown_protocol_fails_on_execute() {
    let cfg = CString::new(TINY.replace("echo", "paxos")).unwrap();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(gb_run_new(cfg.as_ptr(), &mut run), GbStatus::Ok);
        assert_eq!(gb_run_execute(run), GbStatus::ConfigError);
        assert!(last_error().contains("paxos"));
        gb_run_free(run);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(gb_run_new(ptr::null(), &mut run), GbStatus::NullPointer);
        assert_eq!(gb_run_execute(ptr::null_mut()), GbStatus::NullPointer);
        assert_eq!(
            gb_cost_per_txn(ptr::null(), ptr::null_mut()),
            GbStatus::NullPointer
        );
        gb_run_free(ptr::null_mut());
        gb_stream_free(ptr::null_mut());
        gb_string_free(ptr::null_mut());
    }
}

#[test]
fn stream_yields_records_then_done() {
    let cfg = CString::new(TINY).unwrap();
    let mut stream = ptr::null_mut();
    unsafe {
        assert_eq!(gb_stream_new(cfg.as_ptr(), &mut stream), GbStatus::Ok);
        let mut n = 0;
        loop {
            let mut rec = ptr::null_mut();
            match gb_stream_next(stream, &mut rec) {
                GbStatus::Ok => {
                    let v: serde_json::Value = serde_json::from_str(&take(rec)).unwrap();
                    assert_eq!(v["id"], n);
                    n += 1;
                }
                GbStatus::Done => break,
                other => panic!("{other:?}: {}", last_error()),
            }
        }
        assert_eq!(n, 200);
        gb_stream_free(stream);
    }
}

#[test]
fn cost_matches_hand_arithmetic() {
    let i = GbCostInputs {
        servers: 32.0,
        server_price_per_hour: 1.12,
        transfer_gb_per_hour: 10.0,
        transfer_price_per_gb: 0.02,
        stored_gb: 0.0,
        storage_price_per_gb_hour: 0.0,
        throughput: 1e4,
    };
    let mut c = 0.0;
    assert_eq!(unsafe { gb_cost_per_txn(&i, &mut c) }, GbStatus::Ok);
    assert!((c - (35.84 + 0.2) / 3.6e7).abs() < 1e-18);
    let zero = GbCostInputs {
        throughput: 0.0,
        ..i
    };
    assert_eq!(unsafe { gb_cost_per_txn(&zero, &mut c) }, GbStatus::Ok);
    assert!(c.is_infinite());
    let neg = GbCostInputs { servers: -1.0, ..i };
    assert_eq!(
        unsafe { gb_cost_per_txn(&neg, &mut c) },
        GbStatus::ConfigError
    );
}

#[test]
fn protocol_list_and_version() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { gb_protocols(&mut out) }, GbStatus::Ok);
    let names = unsafe { take(out) };
    assert!(names.lines().any(|l| l == "quorum_commit"));
    let v = unsafe { CStr::from_ptr(gb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/geobench.h"))
        .unwrap();
    for sym in [
        "gb_run_new",
        "gb_run_execute",
        "gb_stream_next",
        "gb_last_error_message",
        "GB_STATUS_OK",
        "GbRun",
    ] {
        assert!(h.contains(sym), "{sym} missing from header");
    }
}
