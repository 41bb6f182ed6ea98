//! Stage 4: write each planned section and audit it against its evidence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::verdict::parse_error_list_verdict;
use super::{render as text, SynthesisError};
use crate::gateway::{ChatRequest, Gateway};
use crate::model::{EvidenceItem, Schema, Section, Table, WritingPlan};
use crate::prompts::{render, PromptSet};

const SECTION_CHECKS: &[&str] = &["faithful_grounding", "schema_leakage"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WriteOutcome {
    pub sections: Vec<Section>,
    pub calls: u32,
    /// Section ids whose drafts never passed verification; the last draft
    /// is kept so the document still assembles.
    pub flagged_sections: Vec<usize>,
}

/// Writes every planned section in order.
///
/// Each section gets up to `retries` attempts. A draft first passes a
/// deterministic gate: every assigned fragment verbatim, no level-1 heading
/// lines (headings delimit sections in the assembled document), non-empty
/// body. Only a draft that clears the gate costs a verifier call. Failures
/// of either kind feed the next attempt; a section that exhausts its
/// attempts keeps the final draft and is flagged.
pub fn write_sections(
    gateway: &Gateway,
    writer_model: &str,
    verifier_model: &str,
    prompts: &PromptSet,
    schema: &Schema,
    table: &Table,
    plan: &WritingPlan,
    evidence: &[EvidenceItem],
    retries: u32,
) -> Result<WriteOutcome, SynthesisError> {
    assert!(retries >= 1, "section writing needs at least one attempt");
    let by_id: BTreeMap<&str, &EvidenceItem> =
        evidence.iter().map(|e| (e.id.as_str(), e)).collect();
    let schema_definition = schema.specification_text(true);
    let table_and_schema = text::table_and_schema_text(schema, table);

    let mut sections = Vec::with_capacity(plan.sections.len());
    let mut flagged_sections = Vec::new();
    let mut calls = 0u32;
    let mut previous_summary = String::from("(none; this is the opening section)");

    for planned in &plan.sections {
        let mut assigned = Vec::with_capacity(planned.assigned_evidence_ids.len());
        for id in &planned.assigned_evidence_ids {
            let item = by_id.get(id.as_str()).ok_or_else(|| SynthesisError::StageOutput {
                stage: "write",
                detail: format!("plan references unknown evidence id {id:?}"),
            })?;
            assigned.push(*item);
        }
        let evidence_list = text::evidence_list_text(&assigned);
        let section_index = planned.section_id.to_string();

        let mut feedback = String::new();
        let mut body = String::new();
        let mut accepted = false;
        for _ in 0..retries {
            let prompt = render(
                &prompts.writer,
                &[
                    ("section_index", section_index.as_str()),
                    ("document_type", plan.document_type.as_str()),
                    ("section_title", planned.title.as_str()),
                    ("schema_definition", schema_definition.as_str()),
                    ("previous_summary", previous_summary.as_str()),
                    ("current_summary", planned.summary.as_str()),
                    ("evidence_list", evidence_list.as_str()),
                    ("feedback", feedback.as_str()),
                ],
            );
            let response = gateway.complete(&ChatRequest::user(writer_model, prompt))?;
            calls += 1;
            body = clean_body(&response.content);
            if let Err(problem) = deterministic_gate(&body, &assigned) {
                feedback = format!("\n### Feedback on the previous attempt:\n- {problem}\n");
                continue;
            }
            let verify_prompt = render(
                &prompts.section_verifier,
                &[
                    ("section_content", body.as_str()),
                    ("evidence_list", evidence_list.as_str()),
                    ("table_and_schema", table_and_schema.as_str()),
                ],
            );
            let verdict_response =
                gateway.complete(&ChatRequest::user(verifier_model, verify_prompt))?;
            calls += 1;
            let verdict = parse_error_list_verdict(&verdict_response.content, SECTION_CHECKS);
            if verdict.passed {
                accepted = true;
                break;
            }
            feedback = verdict.feedback_text();
        }
        if !accepted {
            flagged_sections.push(planned.section_id);
        }
        sections.push(Section {
            section_id: planned.section_id,
            title: planned.title.clone(),
            body,
        });
        previous_summary = planned.summary.clone();
    }

    Ok(WriteOutcome { sections, calls, flagged_sections })
}

/// Strips a wrapping code fence and a leading duplicate heading line, the
/// two most common decorations models add despite instructions.
fn clean_body(content: &str) -> String {
    let mut body = content.trim();
    if body.starts_with("```") {
        if let Some(first_break) = body.find('\n') {
            body = &body[first_break + 1..];
        }
        body = body.trim_end();
        if let Some(stripped) = body.strip_suffix("```") {
            body = stripped.trim_end();
        }
    }
    let mut lines = body.lines();
    if let Some(first) = lines.clone().next() {
        if first.starts_with("# ") {
            lines.next();
            return lines.collect::<Vec<_>>().join("\n").trim().to_string();
        }
    }
    body.to_string()
}

fn deterministic_gate(body: &str, assigned: &[&EvidenceItem]) -> Result<(), String> {
    if body.trim().is_empty() {
        return Err("the section came back empty".to_string());
    }
    if body.lines().any(|l| l.starts_with("# ")) {
        return Err(
            "do not put level-1 headings inside the section body; the title is added automatically"
                .to_string(),
        );
    }
    let mut missing = Vec::new();
    for item in assigned {
        for fragment in &item.fragments {
            if !body.contains(fragment.as_str()) {
                missing.push(format!("\"{fragment}\""));
            }
        }
    }
    if !missing.is_empty() {
        return Err(format!(
            "these required fragments are missing verbatim from the section: {}. Embed each one exactly as written",
            missing.join(", ")
        ));
    }
    Ok(())
}
