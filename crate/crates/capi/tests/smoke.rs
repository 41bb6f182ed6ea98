//! Drives the exported C functions end to end, including the error paths
//! and ownership rules a C caller would rely on.

use std::ffi::{CStr, CString};
use std::fs;
use std::path::Path;
use std::ptr;

use doctable_capi::{
    doctable_eval_free, doctable_eval_new, doctable_eval_score, doctable_last_error,
    doctable_normalize_cell, doctable_string_free, DoctableEval, DoctableSimilarity,
    DoctableStatus,
};

const SCHEMA: &str = r#"{
    "entity_type": "company",
    "attributes": [
        {"name": "company", "description": "registered name", "data_type": "text"},
        {"name": "revenue_usd", "description": "annual revenue", "data_type": "integer", "unit": "USD"}
    ],
    "key_attribute_index": 0,
    "cross_constraints": [],
    "resolution_rules": []
}"#;

const TABLE: &str = r#"{"rows": [["acme corp", "3480000"], ["bolt industries", null]]}"#;

const MATRIX: &str = r#"{"labels": [
    [{"category": "EMPTY"}, {"category": "TA", "sub": "unit_transformation"}],
    [{"category": "EMPTY"}, {"category": "EF", "sub": "missing_value_faithfulness"}]
]}"#;

fn take_string(ptr: *mut std::ffi::c_char) -> String {
    assert!(!ptr.is_null(), "expected an owned string");
    let s = unsafe { CStr::from_ptr(ptr) }.to_str().expect("valid UTF-8").to_string();
    unsafe { doctable_string_free(ptr) };
    s
}

fn last_error() -> Option<String> {
    let ptr = doctable_last_error();
    if ptr.is_null() {
        None
    } else {
        Some(take_string(ptr))
    }
}

fn new_eval() -> *mut DoctableEval {
    let schema = CString::new(SCHEMA).unwrap();
    let table = CString::new(TABLE).unwrap();
    let matrix = CString::new(MATRIX).unwrap();
    let mut handle: *mut DoctableEval = ptr::null_mut();
    let status =
        unsafe { doctable_eval_new(schema.as_ptr(), table.as_ptr(), matrix.as_ptr(), &mut handle) };
    assert_eq!(status, DoctableStatus::Ok, "eval_new failed: {:?}", last_error());
    assert!(!handle.is_null());
    handle
}

#[test]
fn perfect_prediction_scores_perfectly() {
    let eval = new_eval();
    let pred = CString::new(r#"[["acme corp", "3,480,000"], ["bolt industries", null]]"#).unwrap();
    let mut out: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe {
        doctable_eval_score(
            eval,
            pred.as_ptr(),
            0.85,
            DoctableSimilarity::NormalizedEdit as std::ffi::c_int,
            &mut out,
        )
    };
    assert_eq!(status, DoctableStatus::Ok, "score failed: {:?}", last_error());
    assert_eq!(last_error(), None, "success must clear the error slot");

    let report: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(report["metrics"]["precision"], 100.0);
    assert_eq!(report["metrics"]["recall"], 100.0);
    assert_eq!(report["metrics"]["f1"], 100.0);
    assert_eq!(report["counts"]["tp"], 4);
    assert_eq!(report["counts"]["gt_cells"], 4);
    unsafe { doctable_eval_free(eval) };
}

#[test]
fn error_paths_set_status_and_message() {
    // NULL argument
    let table = CString::new(TABLE).unwrap();
    let matrix = CString::new(MATRIX).unwrap();
    let mut handle: *mut DoctableEval = ptr::null_mut();
    let status = unsafe {
        doctable_eval_new(ptr::null(), table.as_ptr(), matrix.as_ptr(), &mut handle)
    };
    assert_eq!(status, DoctableStatus::NullArgument);
    assert!(handle.is_null());
    assert!(last_error().expect("message set").contains("schema_json"));

    // malformed JSON
    let bad = CString::new("{not json").unwrap();
    let status = unsafe {
        doctable_eval_new(bad.as_ptr(), table.as_ptr(), matrix.as_ptr(), &mut handle)
    };
    assert_eq!(status, DoctableStatus::InvalidJson);
    assert!(handle.is_null());
    assert!(last_error().expect("message set").contains("schema_json"));

    // shape mismatch: matrix narrower than the table
    let schema = CString::new(SCHEMA).unwrap();
    let narrow = CString::new(r#"{"labels": [[{"category": "EMPTY"}], [{"category": "EMPTY"}]]}"#)
        .unwrap();
    let status = unsafe {
        doctable_eval_new(schema.as_ptr(), table.as_ptr(), narrow.as_ptr(), &mut handle)
    };
    assert_eq!(status, DoctableStatus::InvalidInput);
    assert!(handle.is_null());

    let eval = new_eval();
    let mut out: *mut std::ffi::c_char = ptr::null_mut();

    // prediction arity mismatch
    let ragged = CString::new(r#"[["acme corp"]]"#).unwrap();
    let status = unsafe { doctable_eval_score(eval, ragged.as_ptr(), 0.85, 0, &mut out) };
    assert_eq!(status, DoctableStatus::InvalidInput);
    assert!(out.is_null());

    // tau outside [0, 1]
    let pred = CString::new(r#"[["acme corp", "3480000"]]"#).unwrap();
    let status = unsafe { doctable_eval_score(eval, pred.as_ptr(), 1.5, 0, &mut out) };
    assert_eq!(status, DoctableStatus::InvalidInput);

    // unknown similarity constant
    let status = unsafe { doctable_eval_score(eval, pred.as_ptr(), 0.85, 9, &mut out) };
    assert_eq!(status, DoctableStatus::InvalidInput);
    assert!(last_error().expect("message set").contains("similarity"));

    unsafe { doctable_eval_free(eval) };
}

#[test]
fn normalize_matches_scoring_rules() {
    let cases = [
        ("  ABC Corp. ", "abc corp"),
        ("3,480,000", "3480000"),
        ("N/A", "null"),
        ("2025-06-20", "2025-06-20"),
    ];
    for (raw, want) in cases {
        let value = CString::new(raw).unwrap();
        let mut out: *mut std::ffi::c_char = ptr::null_mut();
        let status = unsafe { doctable_normalize_cell(value.as_ptr(), &mut out) };
        assert_eq!(status, DoctableStatus::Ok);
        assert_eq!(take_string(out), want, "normalizing {raw:?}");
    }
}

#[test]
fn null_frees_are_no_ops() {
    unsafe {
        doctable_string_free(ptr::null_mut());
        doctable_eval_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_surface() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/doctable.h");
    let header = fs::read_to_string(&header_path)
        .unwrap_or_else(|e| panic!("missing {}: {e}", header_path.display()));
    for needle in [
        "DOCTABLE_H",
        "DOCTABLE_STATUS_OK",
        "DOCTABLE_STATUS_INVALID_JSON",
        "DOCTABLE_SIMILARITY_NORMALIZED_EDIT",
        "DOCTABLE_SIMILARITY_TOKEN_JACCARD",
        "typedef struct DoctableEval DoctableEval",
        "doctable_eval_new",
        "doctable_eval_score",
        "doctable_eval_free",
        "doctable_normalize_cell",
        "doctable_last_error",
        "doctable_string_free",
    ] {
        assert!(header.contains(needle), "header lacks {needle}");
    }
}
