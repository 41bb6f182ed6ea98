use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ModelError, SubCapability, Table};

/// Position of one cell, row-major, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub row: usize,
    pub col: usize,
}

/// Text fragments that ground one table cell in the document.
///
/// Direct cells carry their canonical sentence and no sub-capability;
/// refined cells carry the inverse evidence whose decoding exercises
/// `sub_capability`. Missing cells carry no evidence item at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: String,
    pub cell: CellRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_capability: Option<SubCapability>,
    pub fragments: Vec<String>,
}

impl EvidenceItem {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.trim().is_empty() {
            return Err(ModelError::InvalidEvidence("evidence id is empty".into()));
        }
        if self.fragments.is_empty() {
            return Err(ModelError::InvalidEvidence(format!(
                "evidence {} has no fragments",
                self.id
            )));
        }
        if self.fragments.iter().any(|f| f.trim().is_empty()) {
            return Err(ModelError::InvalidEvidence(format!(
                "evidence {} contains a blank fragment",
                self.id
            )));
        }
        Ok(())
    }
}

/// Checks an evidence set against its table: ids unique, cell references in
/// range, and no evidence attached to missing cells (their whole point is
/// that the document stays silent about them).
pub fn validate_evidence_set(items: &[EvidenceItem], table: &Table) -> Result<(), ModelError> {
    let mut ids = BTreeSet::new();
    for item in items {
        item.validate()?;
        if !ids.insert(item.id.as_str()) {
            return Err(ModelError::InvalidEvidence(format!(
                "duplicate evidence id {:?}",
                item.id
            )));
        }
        let CellRef { row, col } = item.cell;
        if row >= table.n_rows() || col >= table.n_cols() {
            return Err(ModelError::InvalidEvidence(format!(
                "evidence {} points at cell ({row}, {col}) outside the {}x{} table",
                item.id,
                table.n_rows(),
                table.n_cols()
            )));
        }
        if table.cell(row, col).is_none() {
            return Err(ModelError::InvalidEvidence(format!(
                "evidence {} attached to missing cell ({row}, {col})",
                item.id
            )));
        }
    }
    Ok(())
}

/// Canonical single-sentence statement of one cell, the seed every piece of
/// synthesized evidence starts from.
pub fn canonical_evidence(
    entity: &str,
    attribute: &str,
    value: Option<&str>,
) -> Result<String, ModelError> {
    let value = value.ok_or(ModelError::NullValue)?;
    Ok(format!("the attribute {attribute} of entity {entity} is {value}"))
}
