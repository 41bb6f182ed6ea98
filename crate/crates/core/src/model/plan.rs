use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EvidenceItem, ModelError};

/// One planned section of the synthesized document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSection {
    /// 1-based position, matching the order sections are written in.
    pub section_id: usize,
    pub title: String,
    /// What the section should communicate; used as writing guidance and as
    /// the "previous section" context for the next writer call.
    pub summary: String,
    pub assigned_evidence_ids: Vec<String>,
}

/// Document blueprint: a document type plus an ordered set of sections that
/// together place every piece of evidence exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WritingPlan {
    pub document_type: String,
    pub sections: Vec<PlanSection>,
}

impl WritingPlan {
    /// Structural checks that do not need the evidence set: ids are 1..=K in
    /// order, titles non-blank, no evidence id assigned twice.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.document_type.trim().is_empty() {
            return Err(ModelError::InvalidPlan("document_type is empty".into()));
        }
        if self.sections.is_empty() {
            return Err(ModelError::InvalidPlan("plan has no sections".into()));
        }
        let mut seen = BTreeSet::new();
        for (idx, section) in self.sections.iter().enumerate() {
            if section.section_id != idx + 1 {
                return Err(ModelError::InvalidPlan(format!(
                    "section at position {} has id {}, expected {}",
                    idx,
                    section.section_id,
                    idx + 1
                )));
            }
            if section.title.trim().is_empty() {
                return Err(ModelError::InvalidPlan(format!(
                    "section {} has a blank title",
                    section.section_id
                )));
            }
            for id in &section.assigned_evidence_ids {
                if !seen.insert(id.as_str()) {
                    return Err(ModelError::InvalidPlan(format!(
                        "evidence id {id:?} assigned to more than one section"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Evidence ids the plan fails to place anywhere. An empty result means
    /// full coverage; unknown ids in the plan are reported as an error by
    /// [`WritingPlan::check_against`].
    pub fn uncovered_ids<'a>(&self, evidence: &'a [EvidenceItem]) -> Vec<&'a str> {
        let assigned: BTreeSet<&str> = self
            .sections
            .iter()
            .flat_map(|s| s.assigned_evidence_ids.iter().map(String::as_str))
            .collect();
        evidence
            .iter()
            .map(|e| e.id.as_str())
            .filter(|id| !assigned.contains(id))
            .collect()
    }

    /// Full check against an evidence set: structure, no unknown ids, and
    /// complete coverage.
    pub fn check_against(&self, evidence: &[EvidenceItem]) -> Result<(), ModelError> {
        self.validate()?;
        let known: BTreeSet<&str> = evidence.iter().map(|e| e.id.as_str()).collect();
        for section in &self.sections {
            for id in &section.assigned_evidence_ids {
                if !known.contains(id.as_str()) {
                    return Err(ModelError::InvalidPlan(format!(
                        "section {} references unknown evidence id {id:?}",
                        section.section_id
                    )));
                }
            }
        }
        let missing = self.uncovered_ids(evidence);
        if !missing.is_empty() {
            return Err(ModelError::InvalidPlan(format!(
                "plan leaves evidence uncovered: {}",
                missing.join(", ")
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::CellRef;
    use super::*;

    fn item(id: &str) -> EvidenceItem {
        EvidenceItem {
            id: id.into(),
            cell: CellRef { row: 0, col: 0 },
            sub_capability: None,
            fragments: vec!["f".into()],
        }
    }

    fn plan(ids: &[&[&str]]) -> WritingPlan {
        WritingPlan {
            document_type: "company report".into(),
            sections: ids
                .iter()
                .enumerate()
                .map(|(i, ids)| PlanSection {
                    section_id: i + 1,
                    title: format!("Section {}", i + 1),
                    summary: "covers some facts".into(),
                    assigned_evidence_ids: ids.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn coverage_gap_detected() {
        let evidence = vec![item("e1"), item("e2"), item("e3")];
        let p = plan(&[&["e1"], &["e3"]]);
        assert_eq!(p.uncovered_ids(&evidence), vec!["e2"]);
        assert!(p.check_against(&evidence).is_err());
    }

    #[test]
    fn full_coverage_passes() {
        let evidence = vec![item("e1"), item("e2")];
        let p = plan(&[&["e2"], &["e1"]]);
        p.check_against(&evidence).unwrap();
    }

    #[test]
    fn duplicate_assignment_rejected() {
        let evidence = vec![item("e1")];
        let p = plan(&[&["e1"], &["e1"]]);
        assert!(p.check_against(&evidence).is_err());
    }

    #[test]
    fn unknown_id_rejected() {
        let evidence = vec![item("e1")];
        let p = plan(&[&["e1", "zzz"]]);
        assert!(p.check_against(&evidence).is_err());
    }

    #[test]
    fn section_ids_must_be_sequential() {
        let mut p = plan(&[&["e1"]]);
        p.sections[0].section_id = 2;
        assert!(p.validate().is_err());
    }
}
