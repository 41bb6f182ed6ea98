//! Prompt templates for every agent in the toolkit.
//!
//! Templates are plain text with `{identifier}` placeholders. Rendering
//! substitutes only placeholders the caller binds; any other brace
//! construct (JSON output examples, prose) passes through verbatim, so
//! templates can show literal JSON shapes without escaping.

use std::io;
use std::path::Path;

/// The eight agent templates. `builtin()` embeds the defaults compiled into
/// the binary; a prompts directory can override any subset by file name.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub annotator: String,
    pub refiner: String,
    pub refine_verifier: String,
    pub planner: String,
    pub writer: String,
    pub section_verifier: String,
    pub judge: String,
    pub extractor: String,
}

impl PromptSet {
    pub fn builtin() -> PromptSet {
        PromptSet {
            annotator: include_str!("../assets/prompts/annotator.txt").to_string(),
            refiner: include_str!("../assets/prompts/refiner.txt").to_string(),
            refine_verifier: include_str!("../assets/prompts/refine_verifier.txt").to_string(),
            planner: include_str!("../assets/prompts/planner.txt").to_string(),
            writer: include_str!("../assets/prompts/writer.txt").to_string(),
            section_verifier: include_str!("../assets/prompts/section_verifier.txt").to_string(),
            judge: include_str!("../assets/prompts/judge.txt").to_string(),
            extractor: include_str!("../assets/prompts/extractor.txt").to_string(),
        }
    }

    /// Builtin templates with per-file overrides from `dir`. A file named
    /// `annotator.txt` replaces the annotator template, and so on; absent
    /// files keep the builtin text.
    pub fn load_dir(dir: &Path) -> io::Result<PromptSet> {
        let mut set = PromptSet::builtin();
        for (name, slot) in [
            ("annotator.txt", &mut set.annotator),
            ("refiner.txt", &mut set.refiner),
            ("refine_verifier.txt", &mut set.refine_verifier),
            ("planner.txt", &mut set.planner),
            ("writer.txt", &mut set.writer),
            ("section_verifier.txt", &mut set.section_verifier),
            ("judge.txt", &mut set.judge),
            ("extractor.txt", &mut set.extractor),
        ] {
            let path = dir.join(name);
            if path.is_file() {
                *slot = std::fs::read_to_string(&path)?;
            }
        }
        Ok(set)
    }
}

/// Replaces each bound `{identifier}` with its value. Identifiers are
/// lowercase ASCII, digits, and underscores. Unbound placeholders and any
/// non-placeholder braces are left untouched.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let bytes = template.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = placeholder_end(bytes, i) {
                let name = &template[i + 1..end];
                if let Some((_, value)) = vars.iter().find(|(k, _)| *k == name) {
                    out.push_str(value);
                    i = end + 1;
                    continue;
                }
            }
        }
        // advance one full character, not one byte
        let ch_len = template[i..].chars().next().expect("in-bounds char").len_utf8();
        out.push_str(&template[i..i + ch_len]);
        i += ch_len;
    }
    out
}

/// Index of the closing brace if `bytes[start..]` opens a well-formed
/// placeholder: `{` + one or more of [a-z0-9_] + `}`.
fn placeholder_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'a'..=b'z' | b'0'..=b'9' | b'_' => i += 1,
            b'}' if i > start + 1 => return Some(i),
            _ => return None,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_bound_placeholders() {
        let out = render("value of {a} and {b_2}", &[("a", "x"), ("b_2", "y")]);
        assert_eq!(out, "value of x and y");
    }

    #[test]
    fn unbound_placeholders_and_json_braces_survive() {
        let template = "{known} then {unknown} and {\n  \"k\": 1\n}";
        let out = render(template, &[("known", "v")]);
        assert_eq!(out, "v then {unknown} and {\n  \"k\": 1\n}");
    }

    #[test]
    fn repeated_placeholder_substituted_each_time() {
        assert_eq!(render("{x},{x}", &[("x", "7")]), "7,7");
    }

    #[test]
    fn value_content_is_not_rescanned() {
        // a value containing a placeholder-looking string stays literal
        let out = render("{a}", &[("a", "{b}"), ("b", "nope")]);
        assert_eq!(out, "{b}");
    }

    #[test]
    fn builtin_templates_expose_expected_placeholders() {
        let set = PromptSet::builtin();
        for (template, needles) in [
            (&set.annotator, vec!["{markdown_table}", "{table_metadata}", "{capability_definitions}", "{feedback}"]),
            (&set.refiner, vec!["{target_cell}", "{canonical_evidence}", "{sub_capability_definitions}", "{feedback}"]),
            (&set.refine_verifier, vec!["{original_value}", "{sub_capability}", "{generated_evidence}"]),
            (&set.planner, vec!["{evidence_list}", "{feedback}"]),
            (&set.writer, vec!["{section_title}", "{previous_summary}", "{current_summary}", "{evidence_list}", "{feedback}"]),
            (&set.section_verifier, vec!["{section_content}", "{evidence_list}", "{table_and_schema}"]),
            (&set.judge, vec!["{document}"]),
            (&set.extractor, vec!["{schema_definition}", "{document}", "{format_directive}"]),
        ] {
            for needle in needles {
                assert!(template.contains(needle), "missing {needle}");
            }
        }
    }

    #[test]
    fn load_dir_overrides_only_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("judge.txt"), "custom judge {document}").unwrap();
        let set = PromptSet::load_dir(dir.path()).unwrap();
        assert_eq!(set.judge, "custom judge {document}");
        assert_eq!(set.annotator, PromptSet::builtin().annotator);
    }
}
