//! Stage 3: plan the document as typed sections that place every evidence
//! id exactly once.

use serde_json::Value;

use super::{render as text, SynthesisError};
use crate::gateway::{extract_structured, ChatRequest, Gateway};
use crate::model::{EvidenceItem, PlanSection, WritingPlan};
use crate::prompts::{render, PromptSet};

/// Asks the planner for a blueprint until the deterministic coverage check
/// accepts it. Every rejection (parse failure, structural violation, or
/// uncovered evidence) is quoted back to the model. Planning is the one
/// stage with no graceful fallback: without full coverage the document
/// would silently drop cells, so exhaustion is an error.
pub fn plan_loop(
    gateway: &Gateway,
    model: &str,
    prompts: &PromptSet,
    evidence: &[EvidenceItem],
    retries: u32,
) -> Result<(WritingPlan, u32), SynthesisError> {
    assert!(retries >= 1, "planning needs at least one attempt");
    let refs: Vec<&EvidenceItem> = evidence.iter().collect();
    let evidence_list = text::evidence_list_text(&refs);
    let mut feedback = String::new();
    let mut calls = 0u32;
    let mut last_failure = String::from("no attempt was made");
    for _ in 0..retries {
        let prompt = render(
            &prompts.planner,
            &[("evidence_list", evidence_list.as_str()), ("feedback", feedback.as_str())],
        );
        let response = gateway.complete(&ChatRequest::user(model, prompt))?;
        calls += 1;
        let outcome = parse_plan(&response.content).and_then(|plan| {
            plan.check_against(evidence).map_err(|e| e.to_string())?;
            Ok(plan)
        });
        match outcome {
            Ok(plan) => return Ok((plan, calls)),
            Err(problem) => {
                last_failure = problem.clone();
                feedback = format!(
                    "\n### Feedback on the previous plan:\n- {problem}\nReturn a corrected plan: section ids must run 1..K in order and every evidence id must be assigned to exactly one section.\n"
                );
            }
        }
    }
    Err(SynthesisError::PlanExhausted { attempts: retries, detail: last_failure })
}

fn parse_plan(content: &str) -> Result<WritingPlan, String> {
    let value = extract_structured(content).map_err(|e| e.to_string())?;
    let document_type = value
        .get("document_type")
        .and_then(|v| v.as_str())
        .ok_or("output lacks a document_type string")?
        .trim()
        .to_string();
    let blueprint = value
        .get("blueprint")
        .and_then(|v| v.as_array())
        .ok_or("output lacks a blueprint array")?;
    let mut sections = Vec::with_capacity(blueprint.len());
    for (i, section) in blueprint.iter().enumerate() {
        let obj = section.as_object().ok_or_else(|| format!("blueprint entry {i} is not an object"))?;
        let section_id = match obj.get("section_id") {
            Some(Value::Number(n)) => n
                .as_u64()
                .ok_or_else(|| format!("blueprint entry {i} has a non-integer section_id"))?
                as usize,
            Some(Value::String(s)) => s
                .trim()
                .parse::<usize>()
                .map_err(|_| format!("blueprint entry {i} has a non-numeric section_id"))?,
            _ => return Err(format!("blueprint entry {i} lacks a section_id")),
        };
        let title = obj
            .get("title")
            .and_then(|v| v.as_str())
            .ok_or_else(|| format!("blueprint entry {i} lacks a title"))?
            .trim()
            .to_string();
        let summary = obj
            .get("summary")
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .trim()
            .to_string();
        let ids = obj
            .get("assigned_evidence_ids")
            .and_then(|v| v.as_array())
            .ok_or_else(|| format!("blueprint entry {i} lacks assigned_evidence_ids"))?;
        let mut assigned = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id
                .as_str()
                .ok_or_else(|| format!("blueprint entry {i} holds a non-string evidence id"))?;
            assigned.push(id.trim().to_string());
        }
        sections.push(PlanSection { section_id, title, summary, assigned_evidence_ids: assigned });
    }
    Ok(WritingPlan { document_type, sections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayLimits, MatchRule, RetryPolicy, ScriptedBackend, TranscriptEntry};
    use crate::model::CellRef;

    fn items() -> Vec<EvidenceItem> {
        vec![
            EvidenceItem {
                id: "e1".into(),
                cell: CellRef { row: 0, col: 0 },
                sub_capability: None,
                fragments: vec!["alpha is a company".into()],
            },
            EvidenceItem {
                id: "e2".into(),
                cell: CellRef { row: 0, col: 1 },
                sub_capability: None,
                fragments: vec!["alpha earns ten".into()],
            },
        ]
    }

    fn gateway(entries: Vec<TranscriptEntry>) -> Gateway {
        Gateway::new(
            Box::new(ScriptedBackend::new(entries, false)),
            RetryPolicy { max_attempts: 1, base_delay_ms: 0, max_delay_ms: 0, jitter: false },
            GatewayLimits::default(),
        )
    }

    fn entry(rule: &str, response: &str) -> TranscriptEntry {
        TranscriptEntry { rule: MatchRule::Substring(rule.into()), response: response.into() }
    }

    const GOOD_PLAN: &str = r#"{"document_type": "press release", "blueprint": [
        {"section_id": 1, "title": "Overview", "summary": "introduce alpha", "assigned_evidence_ids": ["e1"]},
        {"section_id": 2, "title": "Financials", "summary": "revenue details", "assigned_evidence_ids": ["e2"]}
    ]}"#;

    #[test]
    fn valid_plan_accepted_first_try() {
        let gw = gateway(vec![entry("document architect", GOOD_PLAN)]);
        let (plan, calls) = plan_loop(&gw, "m", &PromptSet::builtin(), &items(), 3).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(plan.document_type, "press release");
        assert_eq!(plan.sections.len(), 2);
        assert_eq!(plan.sections[1].assigned_evidence_ids, vec!["e2"]);
    }

    #[test]
    fn uncovered_evidence_is_reprompted_with_feedback() {
        let partial = r#"{"document_type": "memo", "blueprint": [
            {"section_id": 1, "title": "Only one", "summary": "s", "assigned_evidence_ids": ["e1"]}
        ]}"#;
        let gw = gateway(vec![
            entry("document architect", partial),
            entry("Feedback on the previous plan", GOOD_PLAN),
        ]);
        let (plan, calls) = plan_loop(&gw, "m", &PromptSet::builtin(), &items(), 3).unwrap();
        assert_eq!(calls, 2);
        assert_eq!(plan.sections.len(), 2);
    }

    #[test]
    fn numeric_string_section_ids_are_accepted() {
        let plan = parse_plan(
            r#"{"document_type": "memo", "blueprint": [
                {"section_id": "1", "title": "A", "summary": "s", "assigned_evidence_ids": ["e1", "e2"]}
            ]}"#,
        )
        .unwrap();
        assert_eq!(plan.sections[0].section_id, 1);
    }

    #[test]
    fn exhaustion_is_an_error_with_the_last_failure() {
        let bad = r#"{"document_type": "memo", "blueprint": [
            {"section_id": 1, "title": "Only one", "summary": "s", "assigned_evidence_ids": ["e1"]}
        ]}"#;
        let gw = gateway(vec![
            entry("document architect", bad),
            entry("document architect", bad),
        ]);
        let err = plan_loop(&gw, "m", &PromptSet::builtin(), &items(), 2).unwrap_err();
        match err {
            SynthesisError::PlanExhausted { attempts, detail } => {
                assert_eq!(attempts, 2);
                assert!(detail.contains("e2"), "detail should name the uncovered id: {detail}");
            }
            other => panic!("expected PlanExhausted, got {other:?}"),
        }
    }
}
