//! Parsing of verifier responses into a uniform verdict.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::extract_structured;

/// Outcome of one verifier call, normalized across the evidence verifier
/// (a checklist of booleans) and the section verifier (an error list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierVerdict {
    pub passed: bool,
    /// Check name -> whether it held.
    pub checks: BTreeMap<String, bool>,
    pub fail_rationale: Option<String>,
    pub revise_suggestion: Option<String>,
}

impl VerifierVerdict {
    /// Verdict for a verifier response that could not be parsed: a failure
    /// on every check, with the parse problem as the rationale. An unusable
    /// audit must never be treated as approval.
    pub fn unparseable(check_names: &[&str], detail: &str) -> VerifierVerdict {
        VerifierVerdict {
            passed: false,
            checks: check_names.iter().map(|n| (n.to_string(), false)).collect(),
            fail_rationale: Some(format!("verifier response was unusable: {detail}")),
            revise_suggestion: None,
        }
    }

    /// Feedback block threaded into the next generation attempt. Empty for
    /// a passing verdict.
    pub fn feedback_text(&self) -> String {
        if self.passed {
            return String::new();
        }
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|(_, ok)| !**ok)
            .map(|(name, _)| name.as_str())
            .collect();
        let mut out = String::from("\n### Feedback on the previous attempt:\n");
        if !failed.is_empty() {
            out.push_str(&format!("- Failed checks: {}\n", failed.join(", ")));
        }
        if let Some(r) = &self.fail_rationale {
            out.push_str(&format!("- Rationale: {r}\n"));
        }
        if let Some(s) = &self.revise_suggestion {
            out.push_str(&format!("- Suggestion: {s}\n"));
        }
        out.push_str("Revise the output accordingly.\n");
        out
    }
}

/// Reads a `"None"`/empty feedback string as absent.
fn feedback_field(value: Option<&Value>) -> Option<String> {
    let s = value?.as_str()?.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") || s.eq_ignore_ascii_case("null") {
        None
    } else {
        Some(s.to_string())
    }
}

fn as_bool(value: &Value) -> Option<bool> {
    match value {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "pass" | "yes" => Some(true),
            "false" | "fail" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn status_is_pass(value: Option<&Value>) -> Option<bool> {
    let s = value?.as_str()?;
    match s.trim().to_ascii_uppercase().as_str() {
        "PASS" => Some(true),
        "FAIL" => Some(false),
        _ => None,
    }
}

/// Parses the checklist shape used by the evidence verifier:
/// `{"status", "evaluation": {check: bool}, "feedback": {...}}`.
///
/// The verdict fails when the status says FAIL or any named check is false;
/// a missing check defaults to the overall status so a terse PASS response
/// still passes.
pub fn parse_check_verdict(content: &str, check_names: &[&str]) -> VerifierVerdict {
    let value = match extract_structured(content) {
        Ok(v) => v,
        Err(e) => return VerifierVerdict::unparseable(check_names, &e.to_string()),
    };
    let status = status_is_pass(value.get("status"));
    let evaluation = value.get("evaluation").and_then(|v| v.as_object());
    if status.is_none() && evaluation.is_none() {
        return VerifierVerdict::unparseable(check_names, "neither status nor evaluation present");
    }
    let mut checks = BTreeMap::new();
    for name in check_names {
        let held = evaluation
            .and_then(|m| m.get(*name))
            .and_then(as_bool)
            .unwrap_or_else(|| status.unwrap_or(false));
        checks.insert(name.to_string(), held);
    }
    let all_hold = checks.values().all(|&ok| ok);
    let passed = status.unwrap_or(true) && all_hold;
    let feedback = value.get("feedback");
    VerifierVerdict {
        passed,
        checks,
        fail_rationale: feedback_field(feedback.and_then(|f| f.get("fail_rationale"))),
        revise_suggestion: feedback_field(feedback.and_then(|f| f.get("revise_suggest"))),
    }
}

/// Parses the error-list shape used by the section verifier:
/// `{"verification_status", "errors": [{type, description, suggestion}]}`.
///
/// Every reported error marks its check failed; descriptions and
/// suggestions are folded into the feedback fields.
pub fn parse_error_list_verdict(content: &str, check_names: &[&str]) -> VerifierVerdict {
    let value = match extract_structured(content) {
        Ok(v) => v,
        Err(e) => return VerifierVerdict::unparseable(check_names, &e.to_string()),
    };
    let status = status_is_pass(value.get("verification_status"));
    let errors = value.get("errors").and_then(|v| v.as_array());
    if status.is_none() && errors.is_none() {
        return VerifierVerdict::unparseable(check_names, "neither verification_status nor errors present");
    }
    let mut checks: BTreeMap<String, bool> =
        check_names.iter().map(|n| (n.to_string(), true)).collect();
    let mut rationales = Vec::new();
    let mut suggestions = Vec::new();
    for error in errors.into_iter().flatten() {
        if let Some(kind) = error.get("type").and_then(|v| v.as_str()) {
            checks.insert(kind.trim().to_string(), false);
        }
        if let Some(d) = error.get("description").and_then(|v| v.as_str()) {
            rationales.push(d.trim().to_string());
        }
        if let Some(s) = error.get("suggestion").and_then(|v| v.as_str()) {
            suggestions.push(s.trim().to_string());
        }
    }
    let no_errors = errors.map(|e| e.is_empty()).unwrap_or(true);
    let passed = status.unwrap_or(no_errors) && checks.values().all(|&ok| ok);
    VerifierVerdict {
        passed,
        checks,
        fail_rationale: if rationales.is_empty() { None } else { Some(rationales.join("; ")) },
        revise_suggestion: if suggestions.is_empty() { None } else { Some(suggestions.join("; ")) },
    }
}
