//! C ABI over the scoring pipeline.
//!
//! The surface is deliberately small: parse schema, table, and capability
//! matrix once into an opaque evaluation context, then score any number of
//! prediction row sets against it. All strings cross the boundary as
//! NUL-terminated UTF-8; every string returned by this library must be
//! released with [`doctable_string_free`], every context with
//! [`doctable_eval_free`]. Functions never unwind across the boundary; on
//! any failure they return a status code and store a message retrievable
//! via [`doctable_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use doctable::eval::{compute_metrics, score_cells, SimilarityKind};
use doctable::model::{normalize_cell, CapabilityMatrix, Schema, Table};

/// Result of every fallible call in this library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoctableStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An input string was not the expected JSON shape.
    InvalidJson = 3,
    /// Inputs parsed but failed validation (shape mismatch, bad tau, ...).
    InvalidInput = 4,
    /// Unexpected internal failure.
    Internal = 5,
}

/// Key similarity measure used to align prediction rows to ground truth.
/// Pass one of these constants as the `similarity` argument.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoctableSimilarity {
    /// Levenshtein distance scaled into [0, 1].
    NormalizedEdit = 0,
    /// Jaccard overlap of whitespace tokens.
    TokenJaccard = 1,
}

/// Opaque evaluation context: a validated schema, ground-truth table, and
/// capability matrix ready to score predictions against.
pub struct DoctableEval {
    schema: Schema,
    table: Table,
    matrix: CapabilityMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into();
    let stored = CString::new(msg)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn guarded(f: impl FnOnce() -> DoctableStatus) -> DoctableStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            DoctableStatus::Internal
        }
    }
}

/// Borrows a C string argument. `what` names the argument in error messages.
unsafe fn read_cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, DoctableStatus> {
    if ptr.is_null() {
        set_last_error(format!("{what} is NULL"));
        return Err(DoctableStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|e| {
        set_last_error(format!("{what} is not valid UTF-8: {e}"));
        DoctableStatus::InvalidUtf8
    })
}

fn export_string(s: String, out: *mut *mut c_char) -> DoctableStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            clear_last_error();
            DoctableStatus::Ok
        }
        Err(_) => {
            set_last_error("output contained an interior NUL byte");
            DoctableStatus::Internal
        }
    }
}

/// Parses and validates an evaluation context.
///
/// `schema_json` is the attribute schema, `table_json` the ground-truth
/// table (`{"rows": [[...]]}` with `null` for missing cells), and
/// `matrix_json` the capability matrix whose shape must match the table.
/// On success writes a fresh context to `out`; release it with
/// `doctable_eval_free`.
#[no_mangle]
pub unsafe extern "C" fn doctable_eval_new(
    schema_json: *const c_char,
    table_json: *const c_char,
    matrix_json: *const c_char,
    out: *mut *mut DoctableEval,
) -> DoctableStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out is NULL");
            return DoctableStatus::NullArgument;
        }
        unsafe { *out = ptr::null_mut() };
        let schema_text = match unsafe { read_cstr(schema_json, "schema_json") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let table_text = match unsafe { read_cstr(table_json, "table_json") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let matrix_text = match unsafe { read_cstr(matrix_json, "matrix_json") } {
            Ok(s) => s,
            Err(status) => return status,
        };

        let schema: Schema = match serde_json::from_str(schema_text) {
            Ok(v) => v,
            Err(e) => {
                set_last_error(format!("schema_json: {e}"));
                return DoctableStatus::InvalidJson;
            }
        };
        let table: Table = match serde_json::from_str(table_text) {
            Ok(v) => v,
            Err(e) => {
                set_last_error(format!("table_json: {e}"));
                return DoctableStatus::InvalidJson;
            }
        };
        let matrix: CapabilityMatrix = match serde_json::from_str(matrix_text) {
            Ok(v) => v,
            Err(e) => {
                set_last_error(format!("matrix_json: {e}"));
                return DoctableStatus::InvalidJson;
            }
        };

        if let Err(e) = table.validate_against(&schema) {
            set_last_error(e.to_string());
            return DoctableStatus::InvalidInput;
        }
        if let Err(e) = matrix.check_shape(table.n_rows(), table.n_cols()) {
            set_last_error(e.to_string());
            return DoctableStatus::InvalidInput;
        }

        let handle = Box::new(DoctableEval { schema, table, matrix });
        unsafe { *out = Box::into_raw(handle) };
        clear_last_error();
        DoctableStatus::Ok
    })
}

/// Scores one prediction against the context's ground truth.
///
/// `prediction_json` is an array of rows, each an array of cell values with
/// `null` for missing cells, in schema column order. `tau` is the minimum
/// key similarity for a row match, in [0, 1]. `similarity` is one of the
/// `DoctableSimilarity` constants. On success writes a JSON object
/// `{"counts": ..., "metrics": ...}` to `out_json`; release it with
/// `doctable_string_free`.
#[no_mangle]
pub unsafe extern "C" fn doctable_eval_score(
    eval: *const DoctableEval,
    prediction_json: *const c_char,
    tau: f64,
    similarity: c_int,
    out_json: *mut *mut c_char,
) -> DoctableStatus {
    guarded(|| {
        if out_json.is_null() {
            set_last_error("out_json is NULL");
            return DoctableStatus::NullArgument;
        }
        unsafe { *out_json = ptr::null_mut() };
        if eval.is_null() {
            set_last_error("eval is NULL");
            return DoctableStatus::NullArgument;
        }
        let context = unsafe { &*eval };
        let pred_text = match unsafe { read_cstr(prediction_json, "prediction_json") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let kind = match similarity {
            0 => SimilarityKind::NormalizedEdit,
            1 => SimilarityKind::TokenJaccard,
            other => {
                set_last_error(format!("similarity {other} is not a DoctableSimilarity value"));
                return DoctableStatus::InvalidInput;
            }
        };
        let pred: Vec<Vec<Option<String>>> = match serde_json::from_str(pred_text) {
            Ok(v) => v,
            Err(e) => {
                set_last_error(format!("prediction_json: {e}"));
                return DoctableStatus::InvalidJson;
            }
        };

        let score =
            match score_cells(&context.schema, &context.table, &context.matrix, &pred, kind, tau) {
                Ok(s) => s,
                Err(e) => {
                    set_last_error(e.to_string());
                    return DoctableStatus::InvalidInput;
                }
            };
        let metrics = compute_metrics(&score.counts);
        let body = serde_json::json!({ "counts": score.counts, "metrics": metrics });
        export_string(body.to_string(), out_json)
    })
}

/// Releases a context created by `doctable_eval_new`. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn doctable_eval_free(eval: *mut DoctableEval) {
    if !eval.is_null() {
        drop(unsafe { Box::from_raw(eval) });
    }
}

/// Normalizes one cell value the same way scoring does: lowercase, collapsed
/// whitespace, thousands separators and decorative punctuation removed,
/// missing-value spellings mapped to the canonical null token. On success
/// writes the normalized string to `out`; release it with
/// `doctable_string_free`.
#[no_mangle]
pub unsafe extern "C" fn doctable_normalize_cell(
    value: *const c_char,
    out: *mut *mut c_char,
) -> DoctableStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out is NULL");
            return DoctableStatus::NullArgument;
        }
        unsafe { *out = ptr::null_mut() };
        let text = match unsafe { read_cstr(value, "value") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        export_string(normalize_cell(text), out)
    })
}

/// Returns a copy of the message for the calling thread's most recent
/// failure, or NULL if the last call on this thread succeeded. Release the
/// copy with `doctable_string_free`.
#[no_mangle]
pub extern "C" fn doctable_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn doctable_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
