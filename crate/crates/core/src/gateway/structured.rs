use std::fmt;

use serde_json::Value;

/// Failure to locate a JSON object inside model output. `offset` is the
/// byte position scanning gave up at: the first unparseable candidate
/// brace, or the end of the content when no brace exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredParseError {
    pub offset: usize,
    pub reason: String,
}

impl fmt::Display for StructuredParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no JSON object in model output at byte {}: {}", self.offset, self.reason)
    }
}

impl std::error::Error for StructuredParseError {}

/// Pulls the first balanced JSON object out of free-form model output.
///
/// Tolerates markdown fences, leading prose, and trailing commentary; brace
/// tracking is string- and escape-aware so braces inside JSON strings do
/// not confuse it. A candidate that balances but fails to parse (for
/// example `{placeholder}` in surrounding prose) is skipped and scanning
/// continues at the next opening brace.
pub fn extract_structured(content: &str) -> Result<Value, StructuredParseError> {
    let bytes = content.as_bytes();
    let mut first_candidate: Option<usize> = None;
    let mut start = 0;
    while let Some(open_rel) = content[start..].find('{') {
        let open = start + open_rel;
        if first_candidate.is_none() {
            first_candidate = Some(open);
        }
        if let Some(end) = balanced_end(bytes, open) {
            let slice = &content[open..end];
            if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(slice) {
                return Ok(Value::Object(map));
            }
        }
        start = open + 1;
    }
    match first_candidate {
        Some(offset) => Err(StructuredParseError {
            offset,
            reason: "braces never balance into a parseable object".into(),
        }),
        None => Err(StructuredParseError {
            offset: content.len(),
            reason: "content contains no opening brace".into(),
        }),
    }
}

/// Byte index one past the brace closing the object that opens at `open`,
/// or `None` if the braces never balance.
fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_object() {
        let v = extract_structured(r#"{"a": 1}"#).unwrap();
        assert_eq!(v["a"], 1);
    }

    #[test]
    fn fenced_object_with_prose() {
        let content = "Sure! Here is the result:\n```json\n{\"status\": \"PASS\"}\n```\nDone.";
        let v = extract_structured(content).unwrap();
        assert_eq!(v["status"], "PASS");
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_tracking() {
        let content = r#"note {"msg": "uses } and { and \" quotes", "n": 2} tail"#;
        let v = extract_structured(content).unwrap();
        assert_eq!(v["n"], 2);
    }

    #[test]
    fn nested_objects_return_outermost() {
        let v = extract_structured(r#"{"outer": {"inner": true}}"#).unwrap();
        assert!(v["outer"]["inner"].as_bool().unwrap());
    }

    #[test]
    fn unparseable_candidate_is_skipped() {
        let content = r#"the {placeholder} expands, then {"ok": true} follows"#;
        let v = extract_structured(content).unwrap();
        assert_eq!(v["ok"], true);
    }

    #[test]
    fn missing_object_reports_end_offset() {
        let err = extract_structured("no json here").unwrap_err();
        assert_eq!(err.offset, 12);
    }

    #[test]
    fn unbalanced_braces_report_first_candidate() {
        let err = extract_structured(r#"text {"open": 1"#).unwrap_err();
        assert_eq!(err.offset, 5);
    }
}
