//! C ABI over the simulator.
//!
//! Every fallible function returns a [`QflStatus`]. On failure the message
//! is available from [`qfl_last_error`] on the same thread until the next
//! call. Objects are opaque handles released with their `_free` function;
//! passing NULL to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use qflsim::circuit::{predict_probs, CircuitSpec, ClassMapping};
use qflsim::federate::{aggregate, DataSources, RunOptions, Simulation, SimulationConfig};
use qflsim::interface::export::metrics_csv;
use qflsim::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Dimension = 4,
    Structural = 5,
    Parse = 6,
    Io = 7,
    Runtime = 8,
    BufferTooSmall = 9,
    Finished = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: QflStatus, msg: impl Into<String>) -> QflStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> QflStatus {
    let status = match &e {
        Error::Config(_) | Error::Validation(_) => QflStatus::InvalidConfig,
        Error::Dimension { .. } => QflStatus::Dimension,
        Error::Structural(_) => QflStatus::Structural,
        Error::Parse { .. } | Error::Json(_) => QflStatus::Parse,
        Error::Io { .. } => QflStatus::Io,
        _ => QflStatus::Runtime,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> QflStatus) -> QflStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(QflStatus::Panic, "internal panic"))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(QflStatus::NullPointer, concat!("`", stringify!($p), "` is NULL"));
        })+
    };
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn qfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn qfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, QflStatus> {
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QflStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

/// Opaque simulation handle.
pub struct QflSimulation {
    inner: Simulation,
}

/// Metrics of one completed round. `mean_client_loss` is NaN when no local
/// epochs ran.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QflRoundMetrics {
    pub round: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub mean_client_loss: f64,
    pub wall_time_ms: u64,
}

/// Sets up a simulation from a JSON config. `data_dir` may be NULL to use
/// the default data directory.
///
/// # Safety
/// `config_json` must be a NUL-terminated string, `data_dir` NULL or
/// NUL-terminated, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_new(
    config_json: *const c_char,
    data_dir: *const c_char,
    out: *mut *mut QflSimulation,
) -> QflStatus {
    guard(|| {
        non_null!(config_json, out);
        *out = ptr::null_mut();
        let text = match str_arg(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let data_dir = if data_dir.is_null() {
            qflsim::data::default_data_dir()
        } else {
            match str_arg(data_dir, "data_dir") {
                Ok(d) => PathBuf::from(d),
                Err(s) => return s,
            }
        };
        let built = SimulationConfig::from_json(text).and_then(|config| {
            config.validate()?;
            let sources = DataSources {
                data_dir,
                upload_dir: None,
            };
            let corpus = config.dataset.load(&sources)?;
            let options = RunOptions {
                client_threads: None,
                record_wall_time: true,
            };
            Simulation::new(config, corpus, options)
        });
        match built {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(QflSimulation { inner }));
                QflStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs one round. Returns `Finished` once every configured round ran.
///
/// # Safety
/// `sim` must come from [`qfl_simulation_new`]; `out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_step(sim: *mut QflSimulation, out: *mut QflRoundMetrics) -> QflStatus {
    guard(|| {
        non_null!(sim);
        let sim = &mut (*sim).inner;
        if sim.is_finished() {
            return fail(QflStatus::Finished, "all rounds already completed");
        }
        match sim.run_round() {
            Ok(m) => {
                if !out.is_null() {
                    *out = QflRoundMetrics {
                        round: m.round,
                        test_loss: m.test_loss,
                        test_accuracy: m.test_accuracy,
                        mean_client_loss: m.mean_client_loss.unwrap_or(f64::NAN),
                        wall_time_ms: m.wall_time_ms,
                    };
                }
                QflStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs all remaining rounds.
///
/// # Safety
/// `sim` must come from [`qfl_simulation_new`].
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_run(sim: *mut QflSimulation) -> QflStatus {
    guard(|| {
        non_null!(sim);
        let mut sink = |_: &qflsim::federate::RoundMetrics| {};
        match (*sim).inner.run(&mut sink, None) {
            Ok(_) => QflStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sim` must come from [`qfl_simulation_new`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_rounds_completed(sim: *const QflSimulation, out: *mut usize) -> QflStatus {
    guard(|| {
        non_null!(sim, out);
        *out = (*sim).inner.global().round;
        QflStatus::Ok
    })
}

/// # Safety
/// `sim` must come from [`qfl_simulation_new`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_num_parameters(sim: *const QflSimulation, out: *mut usize) -> QflStatus {
    guard(|| {
        non_null!(sim, out);
        *out = (*sim).inner.global().parameters.len();
        QflStatus::Ok
    })
}

/// Copies the global parameters into `buf` (length `len`).
///
/// # Safety
/// `sim` must come from [`qfl_simulation_new`]; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_parameters(sim: *const QflSimulation, buf: *mut f64, len: usize) -> QflStatus {
    guard(|| {
        non_null!(sim, buf);
        let params = &(*sim).inner.global().parameters;
        if len < params.len() {
            return fail(
                QflStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", params.len()),
            );
        }
        slice::from_raw_parts_mut(buf, params.len()).copy_from_slice(params);
        QflStatus::Ok
    })
}

/// Writes the metrics table as NUL-terminated CSV. `required` receives
/// the size including the NUL; pass `buf = NULL` to query it.
///
/// # Safety
/// `sim` must come from [`qfl_simulation_new`]; `buf` NULL or holding
/// `len` bytes; `required` valid.
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_metrics_csv(
    sim: *const QflSimulation,
    buf: *mut c_char,
    len: usize,
    required: *mut usize,
) -> QflStatus {
    guard(|| {
        non_null!(sim, required);
        let csv = metrics_csv((*sim).inner.history());
        *required = csv.len() + 1;
        if buf.is_null() {
            return QflStatus::Ok;
        }
        if len < csv.len() + 1 {
            return fail(QflStatus::BufferTooSmall, format!("need {} bytes, got {len}", csv.len() + 1));
        }
        let dst = slice::from_raw_parts_mut(buf.cast::<u8>(), csv.len() + 1);
        dst[..csv.len()].copy_from_slice(csv.as_bytes());
        dst[csv.len()] = 0;
        QflStatus::Ok
    })
}

/// # Safety
/// `sim` must come from [`qfl_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qfl_simulation_free(sim: *mut QflSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Opaque variational classifier: layered ansatz plus class mapping.
pub struct QflCircuit {
    spec: CircuitSpec,
    mapping: ClassMapping,
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfl_circuit_new(
    num_qubits: usize,
    num_layers: usize,
    num_classes: usize,
    out: *mut *mut QflCircuit,
) -> QflStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let built = CircuitSpec::build(num_qubits, num_layers)
            .and_then(|spec| Ok((ClassMapping::new(num_classes, num_qubits)?, spec)));
        match built {
            Ok((mapping, spec)) => {
                *out = Box::into_raw(Box::new(QflCircuit { spec, mapping }));
                QflStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `circuit` must come from [`qfl_circuit_new`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfl_circuit_num_parameters(circuit: *const QflCircuit, out: *mut usize) -> QflStatus {
    guard(|| {
        non_null!(circuit, out);
        *out = (*circuit).spec.num_parameters();
        QflStatus::Ok
    })
}

/// Class probabilities for one feature vector. `probs` must hold
/// `num_probs >= num_classes` doubles.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn qfl_circuit_predict(
    circuit: *const QflCircuit,
    params: *const f64,
    num_params: usize,
    features: *const f64,
    num_features: usize,
    probs: *mut f64,
    num_probs: usize,
) -> QflStatus {
    guard(|| {
        non_null!(circuit, params, features, probs);
        let c = &*circuit;
        if num_probs < c.mapping.num_classes() {
            return fail(
                QflStatus::BufferTooSmall,
                format!("need {} doubles, got {num_probs}", c.mapping.num_classes()),
            );
        }
        let params = slice::from_raw_parts(params, num_params);
        let features = slice::from_raw_parts(features, num_features);
        match predict_probs(&c.spec, params, &c.mapping, features) {
            Ok(p) => {
                slice::from_raw_parts_mut(probs, p.len()).copy_from_slice(&p);
                QflStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `circuit` must come from [`qfl_circuit_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qfl_circuit_free(circuit: *mut QflCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Size-weighted average of `num_clients` parameter vectors stored
/// row-major in `params`, written to `out` (`num_params` doubles).
///
/// # Safety
/// `params` must hold `num_clients * num_params` doubles, `sizes`
/// `num_clients` values, `out` `num_params` doubles.
#[no_mangle]
pub unsafe extern "C" fn qfl_aggregate(
    params: *const f64,
    sizes: *const usize,
    num_clients: usize,
    num_params: usize,
    out: *mut f64,
) -> QflStatus {
    guard(|| {
        non_null!(params, sizes, out);
        let Some(total) = num_clients.checked_mul(num_params) else {
            return fail(QflStatus::InvalidArgument, "num_clients * num_params overflows");
        };
        let flat = slice::from_raw_parts(params, total);
        let rows: Vec<&[f64]> = if num_params == 0 {
            vec![&[][..]; num_clients]
        } else {
            flat.chunks_exact(num_params).collect()
        };
        let sizes = slice::from_raw_parts(sizes, num_clients);
        match aggregate(&rows, sizes) {
            Ok(avg) => {
                slice::from_raw_parts_mut(out, num_params).copy_from_slice(&avg);
                QflStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
