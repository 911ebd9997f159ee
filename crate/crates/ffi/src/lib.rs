//! C interface to the modstan compiler.
//!
//! Programs are compiled into an opaque [`ModstanProgram`] handle. Queries
//! return a [`ModstanStatus`] and write a newly allocated, NUL-terminated
//! UTF-8 string through an out pointer; release it with
//! [`modstan_string_free`]. JSON results are byte-identical to the command
//! line's `--json` output.
//!
//! When a call fails, [`modstan_last_error`] returns a JSON description of
//! the failure on the calling thread until the next call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use modstan::api::{self, to_json};
use modstan::compile::{compile, Compiled, QueryError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModstanStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The source did not parse or failed its checks.
    Diagnostics = 3,
    /// The selection was malformed or not a valid selection.
    InvalidSelection = 4,
    /// The model graph has more nodes than the cap.
    TooLarge = 5,
    /// Any other query failure.
    QueryFailed = 6,
    /// A bug inside the library; the handle should be discarded.
    Panic = 7,
}

/// A compiled modular program.
pub struct ModstanProgram {
    compiled: Compiled,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message).unwrap_or_else(|e| {
        let mut bytes = e.into_vec();
        bytes.retain(|&b| b != 0);
        CString::new(bytes).expect("NUL bytes removed")
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure(ModstanStatus, String);

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Failure {
        let status = match &e {
            QueryError::Selection(_) | QueryError::Invalid(_) => ModstanStatus::InvalidSelection,
            QueryError::Concretize(_) if e.violations().is_some() => ModstanStatus::InvalidSelection,
            QueryError::TooLarge { .. } => ModstanStatus::TooLarge,
            _ => ModstanStatus::QueryFailed,
        };
        Failure(status, to_json(&e))
    }
}

fn message(code: &str, text: &str) -> String {
    to_json(&serde_json::json!({ "code": code, "message": text }))
}

/// Run `f`, recording failures and catching panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ModstanStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ModstanStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error(message("PANIC", "internal error"));
            ModstanStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(ModstanStatus::NullArgument, message("NULL_ARGUMENT", &format!("`{what}` is null"))));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ModstanStatus::InvalidUtf8, message("INVALID_UTF8", &format!("`{what}` is not UTF-8"))))
}

unsafe fn handle<'a>(p: *const ModstanProgram) -> Result<&'a Compiled, Failure> {
    p.as_ref()
        .map(|p| &p.compiled)
        .ok_or_else(|| Failure(ModstanStatus::NullArgument, message("NULL_ARGUMENT", "`program` is null")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(ModstanStatus::NullArgument, message("NULL_ARGUMENT", "`out` is null")));
    }
    let c = CString::new(s).map_err(|_| Failure(ModstanStatus::QueryFailed, message("NUL_BYTE", "result contains a NUL byte")))?;
    *out = c.into_raw();
    Ok(())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn modstan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// JSON describing the last failure on this thread, or null. Owned by the
/// library; valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn modstan_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Compile `source` into `*out`. On `Diagnostics`, the last error is the
/// JSON array of diagnostics.
///
/// # Safety
/// `source` must be null or a NUL-terminated string; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modstan_compile(source: *const c_char, out: *mut *mut ModstanProgram) -> ModstanStatus {
    guard(|| {
        let src = text(source, "source")?;
        if out.is_null() {
            return Err(Failure(ModstanStatus::NullArgument, message("NULL_ARGUMENT", "`out` is null")));
        }
        *out = ptr::null_mut();
        let compiled = compile(src).map_err(|d| Failure(ModstanStatus::Diagnostics, to_json(&d)))?;
        *out = Box::into_raw(Box::new(ModstanProgram { compiled }));
        Ok(())
    })
}

/// Release a program. Null is ignored.
///
/// # Safety
/// `program` must be null or a handle from [`modstan_compile`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modstan_program_free(program: *mut ModstanProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modstan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of models as a decimal or `2^n` string.
///
/// # Safety
/// `program` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modstan_model_count(program: *const ModstanProgram, cap: usize, out: *mut *mut c_char) -> ModstanStatus {
    guard(|| {
        let c = handle(program)?;
        write_string(out, c.model_count(cap).to_string())
    })
}

/// The model graph as JSON, refused with `TooLarge` above `cap` nodes.
/// A nonzero `nodes_only` leaves the edge list empty.
///
/// # Safety
/// `program` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modstan_model_graph(
    program: *const ModstanProgram,
    cap: usize,
    nodes_only: c_int,
    out: *mut *mut c_char,
) -> ModstanStatus {
    guard(|| {
        let c = handle(program)?;
        let g = api::graph_response(c, nodes_only != 0, cap)?;
        write_string(out, to_json(&g))
    })
}

/// The module graph as JSON.
///
/// # Safety
/// `program` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modstan_module_graph(program: *const ModstanProgram, out: *mut *mut c_char) -> ModstanStatus {
    guard(|| {
        let c = handle(program)?;
        write_string(out, to_json(&c.module_graph()))
    })
}

/// The concrete Stan program for a full selection such as
/// `"Mean:normal,Stddev:standard"`.
///
/// # Safety
/// `program` must be a live handle; `selection` a NUL-terminated string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modstan_concretize(
    program: *const ModstanProgram,
    selection: *const c_char,
    out: *mut *mut c_char,
) -> ModstanStatus {
    guard(|| {
        let c = handle(program)?;
        let sel = text(selection, "selection")?;
        write_string(out, c.concretize(sel)?)
    })
}

/// Concretize or describe a partial selection: the JSON the service returns
/// for `POST /concretize`, with violations and compatible models.
///
/// # Safety
/// `program` must be a live handle; `selection` a NUL-terminated string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modstan_describe_selection(
    program: *const ModstanProgram,
    selection: *const c_char,
    cap: usize,
    out: *mut *mut c_char,
) -> ModstanStatus {
    guard(|| {
        let c = handle(program)?;
        let sel = text(selection, "selection")?;
        write_string(out, to_json(&api::concretize_response(c, sel, cap)?))
    })
}

/// Neighbours of a valid selection as JSON.
///
/// # Safety
/// `program` must be a live handle; `selection` a NUL-terminated string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn modstan_neighbors(
    program: *const ModstanProgram,
    selection: *const c_char,
    out: *mut *mut c_char,
) -> ModstanStatus {
    guard(|| {
        let c = handle(program)?;
        let sel = text(selection, "selection")?;
        write_string(out, to_json(&api::neighbors_response(c, sel)?))
    })
}
