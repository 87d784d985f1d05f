//! C interface to the geobench simulator.
//!
//! Every function returns a [`GbStatus`]. On failure a message describing
//! the error is kept per thread and can be read with
//! [`gb_last_error_message`]. Handles are opaque and must be released with
//! their matching `_free` function. Strings handed out by the library are
//! NUL-terminated and released with [`gb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use geobench::cli::{simulate, single_workload_seed, SimOptions};
use geobench::config::RunConfig;
use geobench::metrics::{cost_per_txn, CostInputs, RunReport};
use geobench::model::{classify, PlacementMap};
use geobench::protocols::Registry;
use geobench::scenarios::Deployment;
use geobench::time::secs;
use geobench::workload::{build_stream, StreamRecord, WorkloadStream};
use geobench::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbStatus {
    Ok = 0,
    /// A stream has no more transactions.
    Done = 1,
    /// Invalid configuration or argument values.
    ConfigError = 2,
    /// The simulator detected an internal inconsistency.
    EngineError = 3,
    /// A required pointer was null.
    NullPointer = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// The handle is not in a state that allows the call.
    InvalidState = 6,
    /// A file could not be read or written.
    IoError = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: GbStatus, msg: impl Into<String>) -> GbStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> GbStatus {
    let status = match &e {
        Error::Engine(_) => GbStatus::EngineError,
        Error::Io { .. } => GbStatus::IoError,
        _ => GbStatus::ConfigError,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`GbStatus::Panic`].
fn guard(f: impl FnOnce() -> GbStatus) -> GbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            fail(GbStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, GbStatus> {
    if p.is_null() {
        return Err(fail(GbStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(p).to_str().map_err(|e| {
        fail(
            GbStatus::InvalidUtf8,
            format!("string argument is not UTF-8: {e}"),
        )
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> GbStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            GbStatus::Ok
        }
        Err(e) => fail(GbStatus::EngineError, format!("output contains NUL: {e}")),
    }
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn gb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Newline-separated names of the registered protocols.
///
/// # Safety
/// `out` must be a valid pointer to write to.
#[no_mangle]
pub unsafe extern "C" fn gb_protocols(out: *mut *mut c_char) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return fail(GbStatus::NullPointer, "out is null");
        }
        give_string(Registry::with_defaults().names().join("\n"), out)
    })
}

/// Inputs to the per-transaction cost model; rates are per hour and
/// `throughput` is committed transactions per second.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GbCostInputs {
    pub servers: f64,
    pub server_price_per_hour: f64,
    pub transfer_gb_per_hour: f64,
    pub transfer_price_per_gb: f64,
    pub stored_gb: f64,
    pub storage_price_per_gb_hour: f64,
    pub throughput: f64,
}

/// Dollar cost per committed transaction. Zero throughput yields infinity.
///
/// # Safety
/// `inputs` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gb_cost_per_txn(inputs: *const GbCostInputs, out: *mut f64) -> GbStatus {
    guard(|| {
        if inputs.is_null() || out.is_null() {
            return fail(GbStatus::NullPointer, "inputs or out is null");
        }
        let i = &*inputs;
        let c = CostInputs {
            servers: i.servers,
            server_price_per_hour: i.server_price_per_hour,
            transfer_gb_per_hour: i.transfer_gb_per_hour,
            transfer_price_per_gb: i.transfer_price_per_gb,
            stored_gb: i.stored_gb,
            storage_price_per_gb_hour: i.storage_price_per_gb_hour,
            throughput: i.throughput,
        };
        match cost_per_txn(&c) {
            Ok(cost) => {
                *out = cost.finite().map_or(f64::INFINITY, |b| b.per_txn);
                GbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

fn parse_config(json: &str) -> Result<RunConfig, GbStatus> {
    RunConfig::from_json(json).map_err(from_error)
}

/// A configured single run and, once executed, its report.
pub struct GbRun {
    config: RunConfig,
    report: Option<RunReport>,
}

/// Creates a run from a JSON run config.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gb_run_new(config_json: *const c_char, out: *mut *mut GbRun) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return fail(GbStatus::NullPointer, "out is null");
        }
        let json = match read_str(config_json) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match parse_config(json) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(GbRun {
                    config,
                    report: None,
                }));
                GbStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Executes the run to completion. A run executes at most once.
///
/// # Safety
/// `run` must be a live handle from [`gb_run_new`].
#[no_mangle]
pub unsafe extern "C" fn gb_run_execute(run: *mut GbRun) -> GbStatus {
    guard(|| {
        let Some(run) = run.as_mut() else {
            return fail(GbStatus::NullPointer, "run is null");
        };
        if run.report.is_some() {
            return fail(GbStatus::InvalidState, "run already executed");
        }
        match simulate(
            &run.config,
            &Registry::with_defaults(),
            SimOptions::default(),
        ) {
            Ok(r) => {
                run.report = Some(r);
                GbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

unsafe fn executed<'a>(run: *const GbRun) -> Result<&'a RunReport, GbStatus> {
    let run = run
        .as_ref()
        .ok_or_else(|| fail(GbStatus::NullPointer, "run is null"))?;
    run.report
        .as_ref()
        .ok_or_else(|| fail(GbStatus::InvalidState, "run has not been executed"))
}

/// Committed transactions per second over the measurement window.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gb_run_committed_tps(run: *const GbRun, out: *mut f64) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return fail(GbStatus::NullPointer, "out is null");
        }
        match executed(run) {
            Ok(r) => {
                *out = r.committed_tps;
                GbStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// The full report as JSON; free with [`gb_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gb_run_report_json(run: *const GbRun, out: *mut *mut c_char) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return fail(GbStatus::NullPointer, "out is null");
        }
        match executed(run) {
            Ok(r) => give_string(serde_json::to_string(r).expect("reports serialize"), out),
            Err(s) => s,
        }
    })
}

/// # Safety
/// `run` must be null or a handle from [`gb_run_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gb_run_free(run: *mut GbRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// A lazily generated transaction stream.
pub struct GbStream {
    stream: WorkloadStream,
    placement: PlacementMap,
}

/// Creates the stream a run config would submit.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gb_stream_new(
    config_json: *const c_char,
    out: *mut *mut GbStream,
) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return fail(GbStatus::NullPointer, "out is null");
        }
        let json = match read_str(config_json) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let cfg = match parse_config(json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let built = (|| {
            let reg = Registry::with_defaults();
            let info = reg.get(&cfg.protocol)?;
            let ws = single_workload_seed(cfg.seed);
            let d = Deployment::build(
                &cfg.setup,
                |r| (info.scope)(r, &cfg.setup.protocol_params),
                ws,
            )?;
            let stream = build_stream(
                &cfg.setup.workload,
                &d.placement,
                &cfg.setup.arrival,
                d.origin_weights.as_deref(),
                secs(cfg.setup.duration_s),
                ws,
            )?;
            Ok(GbStream {
                stream,
                placement: d.placement,
            })
        })();
        match built {
            Ok(s) => {
                *out = Box::into_raw(Box::new(s));
                GbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Next transaction as one JSON stream record, or [`GbStatus::Done`].
///
/// # Safety
/// `stream` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gb_stream_next(stream: *mut GbStream, out: *mut *mut c_char) -> GbStatus {
    guard(|| {
        let Some(s) = stream.as_mut() else {
            return fail(GbStatus::NullPointer, "stream is null");
        };
        if out.is_null() {
            return fail(GbStatus::NullPointer, "out is null");
        }
        let Some(txn) = s.stream.next() else {
            return GbStatus::Done;
        };
        match classify(&txn, &s.placement) {
            Ok(class) => give_string(
                serde_json::to_string(&StreamRecord::from_txn(&txn, class))
                    .expect("records serialize"),
                out,
            ),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `stream` must be null or a handle from [`gb_stream_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gb_stream_free(stream: *mut GbStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}
