//! C ABI for the dyngnn engine.
//!
//! Every fallible function returns a [`DgnnStatus`]. On failure the message
//! is kept per thread and can be read with [`dgnn_last_error_message`].
//! Graphs are opaque [`DgnnGraph`] handles released with
//! [`dgnn_graph_free`]; strings returned by the library are released with
//! [`dgnn_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dyngnn::cli::{compare_partitioning_graph, train_graph, FileConfig, TrainSettings};
use dyngnn::dist::{partition_transfer_cost, plan_snapshot_partition};
use dyngnn::dtdg::{generate_random_dtdg, load_edge_list, save_edge_list, DynamicGraph};
use dyngnn::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Parse = 4,
    CorruptDelta = 5,
    Protocol = 6,
    Io = 7,
    /// A string argument was not valid UTF-8.
    Utf8 = 8,
    /// A Rust panic was caught at the boundary.
    Panic = 9,
}

/// A dynamic graph: a sequence of sparse snapshots over a fixed vertex set.
pub struct DgnnGraph {
    inner: DynamicGraph,
}

/// Entries shipped by graph-difference streaming and by sending every
/// snapshot in full.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DgnnTransferCost {
    pub delta_index_entries: u64,
    pub delta_value_entries: u64,
    pub naive_index_entries: u64,
    pub naive_value_entries: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(DgnnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) => DgnnStatus::InvalidInput,
            Error::Config(_) => DgnnStatus::Config,
            Error::Parse { .. } => DgnnStatus::Parse,
            Error::CorruptDelta(_) => DgnnStatus::CorruptDelta,
            Error::Protocol(_) => DgnnStatus::Protocol,
            Error::Io { .. } => DgnnStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DgnnStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and recording the
/// message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DgnnStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DgnnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            DgnnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(DgnnStatus::Utf8, format!("{what}: {e}")))
}

unsafe fn graph_arg<'a>(g: *const DgnnGraph) -> Result<&'a DynamicGraph, Failure> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("graph"))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Settings from optional TOML text (same keys as the `--config` file).
unsafe fn settings_arg(config_toml: *const c_char) -> Result<TrainSettings, Failure> {
    let file = if config_toml.is_null() {
        FileConfig::default()
    } else {
        FileConfig::parse(str_arg(config_toml, "config")?)?
    };
    Ok(TrainSettings::from_file(&file))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure(DgnnStatus::InvalidInput, e.to_string()))
}

fn boxed_graph(g: DynamicGraph) -> *mut DgnnGraph {
    Box::into_raw(Box::new(DgnnGraph { inner: g }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dgnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn dgnn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generates a random graph with `round(vertices * density)` edges per
/// snapshot.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dgnn_graph_generate(
    timesteps: usize,
    vertices: usize,
    density: f64,
    seed: u64,
    out: *mut *mut DgnnGraph,
) -> DgnnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = boxed_graph(generate_random_dtdg(timesteps, vertices, density, seed)?);
        Ok(())
    })
}

/// Reads a graph from an edge-list file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgnn_graph_load(
    path: *const c_char,
    out: *mut *mut DgnnGraph,
) -> DgnnStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_arg(out, "out")?;
        *out = boxed_graph(load_edge_list(path)?);
        Ok(())
    })
}

/// Writes a graph as an edge-list file.
///
/// # Safety
/// `graph` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dgnn_graph_save(
    graph: *const DgnnGraph,
    path: *const c_char,
) -> DgnnStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        save_edge_list(g, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dgnn_graph_free(graph: *mut DgnnGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgnn_graph_num_vertices(
    graph: *const DgnnGraph,
    out: *mut usize,
) -> DgnnStatus {
    guard(|| {
        *out_arg(out, "out")? = graph_arg(graph)?.num_vertices();
        Ok(())
    })
}

/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgnn_graph_num_timesteps(
    graph: *const DgnnGraph,
    out: *mut usize,
) -> DgnnStatus {
    guard(|| {
        *out_arg(out, "out")? = graph_arg(graph)?.num_timesteps();
        Ok(())
    })
}

/// Stored entries of snapshot `t`.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgnn_graph_snapshot_nnz(
    graph: *const DgnnGraph,
    t: usize,
    out: *mut usize,
) -> DgnnStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        if t >= g.num_timesteps() {
            return Err(Failure(
                DgnnStatus::InvalidInput,
                format!(
                    "timestep {t} out of range for {} snapshots",
                    g.num_timesteps()
                ),
            ));
        }
        *out_arg(out, "out")? = g.snapshot(t).nnz();
        Ok(())
    })
}

/// Cost of shipping the graph's snapshots to `workers` workers over
/// `blocks` blocks, with and without graph-difference streaming.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgnn_transfer_cost(
    graph: *const DgnnGraph,
    workers: usize,
    blocks: usize,
    out: *mut DgnnTransferCost,
) -> DgnnStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        let out = out_arg(out, "out")?;
        let plan = plan_snapshot_partition(g.num_timesteps(), workers, blocks)?;
        let (delta, naive) = partition_transfer_cost(g.snapshots(), &plan)?;
        *out = DgnnTransferCost {
            delta_index_entries: delta.index_entries_sent,
            delta_value_entries: delta.value_entries_sent,
            naive_index_entries: naive.index_entries_sent,
            naive_value_entries: naive.value_entries_sent,
        };
        Ok(())
    })
}

/// Trains a link-prediction model on `graph` and returns the run report as
/// JSON. `config_toml` may be null for defaults; it takes the same keys as
/// the command-line config file.
///
/// # Safety
/// `graph` must be a live handle, `config_toml` null or a NUL-terminated
/// string, and `out_json` a valid pointer. The returned string must be
/// released with [`dgnn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dgnn_train_json(
    graph: *const DgnnGraph,
    config_toml: *const c_char,
    out_json: *mut *mut c_char,
) -> DgnnStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        let s = settings_arg(config_toml)?;
        let out = out_arg(out_json, "out_json")?;
        let (report, _) = train_graph(&s, g)?;
        let text = serde_json::to_string(&report)
            .map_err(|e| Failure(DgnnStatus::InvalidInput, e.to_string()))?;
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Communication volume of snapshot and vertex partitioning for each of
/// the `num_workers` worker counts, as JSON.
///
/// # Safety
/// As for [`dgnn_train_json`]; `workers` must point to `num_workers`
/// values.
#[no_mangle]
pub unsafe extern "C" fn dgnn_compare_partitioning_json(
    graph: *const DgnnGraph,
    config_toml: *const c_char,
    workers: *const usize,
    num_workers: usize,
    out_json: *mut *mut c_char,
) -> DgnnStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        let s = settings_arg(config_toml)?;
        if workers.is_null() && num_workers > 0 {
            return Err(null("workers"));
        }
        let counts = if num_workers == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(workers, num_workers)
        };
        let out = out_arg(out_json, "out_json")?;
        let report = compare_partitioning_graph(&s, g, counts)?;
        let text = serde_json::to_string(&report)
            .map_err(|e| Failure(DgnnStatus::InvalidInput, e.to_string()))?;
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dgnn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
