//! Case directory layout: the artifact files one synthesized case is made
//! of, plus loading and structural validation.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::model::{
    validate_evidence_set, CapabilityMatrix, Category, EvidenceItem, Schema, SubCapability, Table,
    WritingPlan,
};
use crate::synthesis::FlaggedCell;

pub const SCHEMA_FILE: &str = "schema.json";
pub const TABLE_FILE: &str = "table.json";
pub const MATRIX_FILE: &str = "capability_matrix.json";
pub const EVIDENCE_FILE: &str = "evidence.json";
pub const PLAN_FILE: &str = "plan.json";
pub const DOCUMENT_FILE: &str = "document.md";
pub const PROVENANCE_FILE: &str = "provenance.json";
pub const RUN_LOG_FILE: &str = "run_log.json";
pub const QUALITY_FILE: &str = "quality.json";
pub const WORKING_DIR: &str = "working";

/// Where each evidence id ended up and what went wrong along the way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    /// Evidence id -> section id carrying its fragments.
    pub evidence_sections: BTreeMap<String, usize>,
    /// True when any cell or section fell back after exhausting retries, or
    /// a fragment went missing from the assembled text.
    pub degraded: bool,
    pub flagged_cells: Vec<FlaggedCell>,
    pub flagged_sections: Vec<usize>,
    pub warnings: Vec<String>,
}

/// One loaded case: everything needed to run extraction and evaluation.
#[derive(Debug, Clone)]
pub struct CaseBundle {
    pub schema: Schema,
    pub table: Table,
    pub matrix: CapabilityMatrix,
    pub evidence: Vec<EvidenceItem>,
    pub plan: WritingPlan,
    pub document: String,
    pub provenance: Provenance,
}

impl CaseBundle {
    /// Loads all case artifacts from a directory. Fails on the first
    /// missing or unparseable file; use [`validate_case`] for a full
    /// structural report instead.
    pub fn load(dir: &Path) -> io::Result<CaseBundle> {
        Ok(CaseBundle {
            schema: read_json(&dir.join(SCHEMA_FILE))?,
            table: read_json(&dir.join(TABLE_FILE))?,
            matrix: read_json(&dir.join(MATRIX_FILE))?,
            evidence: read_json(&dir.join(EVIDENCE_FILE))?,
            plan: read_json(&dir.join(PLAN_FILE))?,
            document: std::fs::read_to_string(dir.join(DOCUMENT_FILE))?,
            provenance: read_json(&dir.join(PROVENANCE_FILE))?,
        })
    }
}

/// One structural problem found in a case directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub file: String,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.file, self.detail)
    }
}

/// Checks every invariant a finished case must satisfy and returns all
/// violations instead of stopping at the first. A clean, non-degraded run
/// produces an empty report; a degraded case typically shows up here with
/// grounding gaps.
pub fn validate_case(dir: &Path) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut fail = |file: &str, detail: String| {
        violations.push(Violation { file: file.to_string(), detail });
    };

    let schema: Option<Schema> = match read_json(&dir.join(SCHEMA_FILE)) {
        Ok(s) => Some(s),
        Err(e) => {
            fail(SCHEMA_FILE, e.to_string());
            None
        }
    };
    let table: Option<Table> = match read_json(&dir.join(TABLE_FILE)) {
        Ok(t) => Some(t),
        Err(e) => {
            fail(TABLE_FILE, e.to_string());
            None
        }
    };
    let matrix: Option<CapabilityMatrix> = match read_json(&dir.join(MATRIX_FILE)) {
        Ok(m) => Some(m),
        Err(e) => {
            fail(MATRIX_FILE, e.to_string());
            None
        }
    };
    let evidence: Option<Vec<EvidenceItem>> = match read_json(&dir.join(EVIDENCE_FILE)) {
        Ok(v) => Some(v),
        Err(e) => {
            fail(EVIDENCE_FILE, e.to_string());
            None
        }
    };
    let plan: Option<WritingPlan> = match read_json(&dir.join(PLAN_FILE)) {
        Ok(p) => Some(p),
        Err(e) => {
            fail(PLAN_FILE, e.to_string());
            None
        }
    };
    let document = match std::fs::read_to_string(dir.join(DOCUMENT_FILE)) {
        Ok(d) => Some(d),
        Err(e) => {
            fail(DOCUMENT_FILE, e.to_string());
            None
        }
    };
    let provenance: Option<Provenance> = match read_json(&dir.join(PROVENANCE_FILE)) {
        Ok(p) => Some(p),
        Err(e) => {
            fail(PROVENANCE_FILE, e.to_string());
            None
        }
    };

    if let Some(schema) = &schema {
        if let Err(e) = schema.validate() {
            fail(SCHEMA_FILE, e.to_string());
        }
    }
    if let (Some(schema), Some(table)) = (&schema, &table) {
        if let Err(e) = table.validate_against(schema) {
            fail(TABLE_FILE, e.to_string());
        }
    }
    if let (Some(table), Some(matrix)) = (&table, &matrix) {
        if let Err(e) = matrix.check_shape(table.n_rows(), table.n_cols()) {
            fail(MATRIX_FILE, e.to_string());
        } else {
            // a missing value is always labeled missing-value faithfulness,
            // and that label never applies to a present value
            for (r, c, label) in matrix.iter_cells() {
                let missing = table.cell(r, c).is_none();
                let is_ef = label.category() == Category::EmptyFaithfulness;
                if missing && label.sub() != Some(SubCapability::MissingValueFaithfulness) {
                    fail(MATRIX_FILE, format!("cell ({r},{c}) is missing but labeled {}", label.category().code()));
                } else if !missing && is_ef {
                    fail(MATRIX_FILE, format!("cell ({r},{c}) has a value but is labeled EF"));
                }
            }
        }
    }
    if let (Some(table), Some(evidence)) = (&table, &evidence) {
        if let Err(e) = validate_evidence_set(evidence, table) {
            fail(EVIDENCE_FILE, e.to_string());
        }
    }
    if let (Some(plan), Some(evidence)) = (&plan, &evidence) {
        if let Err(e) = plan.check_against(evidence) {
            fail(PLAN_FILE, e.to_string());
        }
    }

    if let (Some(plan), Some(evidence), Some(document)) = (&plan, &evidence, &document) {
        let sections = split_document_sections(document);
        if sections.len() != plan.sections.len() {
            fail(
                DOCUMENT_FILE,
                format!(
                    "document has {} sections, plan has {}",
                    sections.len(),
                    plan.sections.len()
                ),
            );
        } else {
            for (planned, (title, body)) in plan.sections.iter().zip(&sections) {
                if planned.title != *title {
                    fail(
                        DOCUMENT_FILE,
                        format!(
                            "section {} is titled {title:?}, plan says {:?}",
                            planned.section_id, planned.title
                        ),
                    );
                }
                let by_id: BTreeMap<&str, &EvidenceItem> =
                    evidence.iter().map(|e| (e.id.as_str(), e)).collect();
                for id in &planned.assigned_evidence_ids {
                    let Some(item) = by_id.get(id.as_str()) else { continue };
                    for (i, fragment) in item.fragments.iter().enumerate() {
                        if !body.contains(fragment.as_str()) {
                            fail(
                                DOCUMENT_FILE,
                                format!(
                                    "evidence {id} fragment {} is not verbatim in section {}",
                                    i + 1,
                                    planned.section_id
                                ),
                            );
                        }
                    }
                }
            }
        }
    }

    if let (Some(plan), Some(provenance)) = (&plan, &provenance) {
        for planned in &plan.sections {
            for id in &planned.assigned_evidence_ids {
                match provenance.evidence_sections.get(id) {
                    Some(&sec) if sec == planned.section_id => {}
                    Some(&sec) => fail(
                        PROVENANCE_FILE,
                        format!("evidence {id} mapped to section {sec}, plan assigns it to {}", planned.section_id),
                    ),
                    None => fail(PROVENANCE_FILE, format!("evidence {id} missing from the section map")),
                }
            }
        }
    }

    violations
}

/// Splits an assembled document back into `(title, body)` sections at its
/// level-1 headings.
pub fn split_document_sections(document: &str) -> Vec<(String, String)> {
    let mut sections: Vec<(String, String)> = Vec::new();
    for line in document.lines() {
        if let Some(title) = line.strip_prefix("# ") {
            sections.push((title.to_string(), String::new()));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    for (_, body) in &mut sections {
        *body = body.trim().to_string();
    }
    sections
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
    let bytes = std::fs::read(path)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)
}
