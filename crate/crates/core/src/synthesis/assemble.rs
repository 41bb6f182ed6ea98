//! Stage 5: stitch sections into the final document and record where each
//! piece of evidence landed.

use std::collections::BTreeMap;

use crate::model::{EvidenceItem, Section, SynthDocument, WritingPlan};

pub struct AssembledCase {
    pub document: SynthDocument,
    /// Evidence id -> section id that carries its fragments.
    pub evidence_sections: BTreeMap<String, usize>,
    /// Fragments that did not survive into their section verbatim. Empty on
    /// a clean run; flagged sections can leave gaps here.
    pub grounding_gaps: Vec<String>,
}

pub fn assemble_case(
    plan: &WritingPlan,
    sections: Vec<Section>,
    evidence: &[EvidenceItem],
) -> AssembledCase {
    let mut evidence_sections = BTreeMap::new();
    for planned in &plan.sections {
        for id in &planned.assigned_evidence_ids {
            evidence_sections.insert(id.clone(), planned.section_id);
        }
    }
    let document = SynthDocument::assemble(sections);
    let body_by_id: BTreeMap<usize, &str> = document
        .sections
        .iter()
        .map(|s| (s.section_id, s.body.as_str()))
        .collect();
    let mut grounding_gaps = Vec::new();
    for item in evidence {
        let Some(&section_id) = evidence_sections.get(&item.id) else {
            grounding_gaps.push(format!("evidence {} is not placed by the plan", item.id));
            continue;
        };
        let body = body_by_id.get(&section_id).copied().unwrap_or("");
        for (i, fragment) in item.fragments.iter().enumerate() {
            if !body.contains(fragment.as_str()) {
                grounding_gaps.push(format!(
                    "evidence {} fragment {} is not verbatim in section {}",
                    item.id,
                    i + 1,
                    section_id
                ));
            }
        }
    }
    AssembledCase { document, evidence_sections, grounding_gaps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellRef, PlanSection};

    fn fixture() -> (WritingPlan, Vec<Section>, Vec<EvidenceItem>) {
        let plan = WritingPlan {
            document_type: "memo".into(),
            sections: vec![
                PlanSection {
                    section_id: 1,
                    title: "One".into(),
                    summary: "s1".into(),
                    assigned_evidence_ids: vec!["e1".into()],
                },
                PlanSection {
                    section_id: 2,
                    title: "Two".into(),
                    summary: "s2".into(),
                    assigned_evidence_ids: vec!["e2".into()],
                },
            ],
        };
        let sections = vec![
            Section { section_id: 1, title: "One".into(), body: "alpha opened its doors".into() },
            Section { section_id: 2, title: "Two".into(), body: "alpha kept growing".into() },
        ];
        let evidence = vec![
            EvidenceItem {
                id: "e1".into(),
                cell: CellRef { row: 0, col: 0 },
                sub_capability: None,
                fragments: vec!["alpha opened its doors".into()],
            },
            EvidenceItem {
                id: "e2".into(),
                cell: CellRef { row: 0, col: 1 },
                sub_capability: None,
                fragments: vec!["alpha kept growing".into()],
            },
        ];
        (plan, sections, evidence)
    }

    #[test]
    fn clean_assembly_maps_every_id_and_finds_no_gaps() {
        let (plan, sections, evidence) = fixture();
        let out = assemble_case(&plan, sections, &evidence);
        assert!(out.grounding_gaps.is_empty());
        assert_eq!(out.evidence_sections["e1"], 1);
        assert_eq!(out.evidence_sections["e2"], 2);
        assert_eq!(
            out.document.text,
            "# One\n\nalpha opened its doors\n\n# Two\n\nalpha kept growing"
        );
        assert_eq!(out.document.token_count, 11);
    }

    #[test]
    fn lost_fragment_is_reported_as_a_gap() {
        let (plan, mut sections, evidence) = fixture();
        sections[1].body = "a rewrite that dropped the fragment".into();
        let out = assemble_case(&plan, sections, &evidence);
        assert_eq!(out.grounding_gaps.len(), 1);
        assert!(out.grounding_gaps[0].contains("e2"));
        assert!(out.grounding_gaps[0].contains("section 2"));
    }
}
