//! Stage 2: refine each coarse label to a sub-capability and synthesize the
//! inverse evidence whose decoding exercises it.

use serde::{Deserialize, Serialize};

use super::verdict::parse_check_verdict;
use super::{render as text, SynthesisError};
use crate::gateway::{extract_structured, ChatRequest, Gateway};
use crate::model::{
    canonical_evidence, CapabilityLabel, CapabilityMatrix, Category, CellRef, EvidenceItem,
    Schema, SubCapability, Table,
};
use crate::prompts::{render, PromptSet};

const EVIDENCE_CHECKS: &[&str] = &["value_correctness", "label_alignment", "schema_leakage"];

/// A cell whose evidence loop exhausted its attempts and was downgraded to
/// a direct statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCell {
    pub cell: CellRef,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvidenceOutcome {
    pub matrix: CapabilityMatrix,
    pub evidence: Vec<EvidenceItem>,
    pub calls: u32,
    pub flagged: Vec<FlaggedCell>,
}

/// Turns the coarse category grid into final labels plus grounded evidence.
///
/// Deterministic cells never cost a call: a missing value is labeled
/// missing-value faithfulness and carries no evidence (absence cannot be
/// grounded), and a direct cell carries its canonical sentence. Every other
/// cell runs up to `retries` refine attempts; an attempt whose output fails
/// the shape checks is consumed without a verifier call, otherwise the
/// verifier audits it and a FAIL feeds its rationale into the next attempt.
/// A cell that exhausts its attempts is flagged and downgraded to a direct
/// statement so the case still assembles.
///
/// Evidence ids are `e1..eN` in row-major cell order.
pub fn evidence_loop(
    gateway: &Gateway,
    refiner_model: &str,
    verifier_model: &str,
    prompts: &PromptSet,
    schema: &Schema,
    table: &Table,
    coarse: &[Vec<Category>],
    retries: u32,
) -> Result<EvidenceOutcome, SynthesisError> {
    assert!(retries >= 1, "evidence refinement needs at least one attempt");
    let header: Vec<String> = schema.attributes.iter().map(|a| a.name.clone()).collect();
    let markdown_table = table.to_markdown(&header);
    let schema_definition = schema.specification_text(true);
    let coarse_text = text::coarse_matrix_text(schema, coarse);

    let mut labels: Vec<Vec<CapabilityLabel>> = Vec::with_capacity(table.n_rows());
    let mut evidence: Vec<EvidenceItem> = Vec::new();
    let mut flagged = Vec::new();
    let mut calls = 0u32;

    for row in 0..table.n_rows() {
        let mut label_row = Vec::with_capacity(table.n_cols());
        let entity = text::entity_name(table, schema.key_attribute_index, row);
        for col in 0..table.n_cols() {
            let attr = &schema.attributes[col].name;
            let cell = CellRef { row, col };
            let value = table.cell(row, col);
            let label = match (value, coarse[row][col]) {
                // absence cannot be evidenced; the document simply never
                // states this value
                (None, _) => CapabilityLabel::from_sub(SubCapability::MissingValueFaithfulness),
                (Some(v), Category::Empty) | (Some(v), Category::EmptyFaithfulness) => {
                    push_item(&mut evidence, cell, None, vec![canonical_evidence(&entity, attr, Some(v))?]);
                    CapabilityLabel::empty()
                }
                (Some(v), category) => {
                    let canonical = canonical_evidence(&entity, attr, Some(v))?;
                    match refine_cell(
                        gateway,
                        refiner_model,
                        verifier_model,
                        prompts,
                        RefineContext {
                            markdown_table: &markdown_table,
                            schema_definition: &schema_definition,
                            coarse_text: &coarse_text,
                            target_cell: &text::target_cell_text(schema, table, row, col, category),
                            canonical: &canonical,
                            category,
                            value: v,
                        },
                        retries,
                        &mut calls,
                    )? {
                        Ok((sub, fragments)) => {
                            push_item(&mut evidence, cell, Some(sub), fragments);
                            CapabilityLabel::from_sub(sub)
                        }
                        Err(reason) => {
                            flagged.push(FlaggedCell { cell, reason });
                            push_item(&mut evidence, cell, None, vec![canonical]);
                            CapabilityLabel::empty()
                        }
                    }
                }
            };
            label_row.push(label);
        }
        labels.push(label_row);
    }

    Ok(EvidenceOutcome {
        matrix: CapabilityMatrix::new(labels)?,
        evidence,
        calls,
        flagged,
    })
}

fn push_item(
    evidence: &mut Vec<EvidenceItem>,
    cell: CellRef,
    sub: Option<SubCapability>,
    fragments: Vec<String>,
) {
    evidence.push(EvidenceItem {
        id: format!("e{}", evidence.len() + 1),
        cell,
        sub_capability: sub,
        fragments,
    });
}

struct RefineContext<'a> {
    markdown_table: &'a str,
    schema_definition: &'a str,
    coarse_text: &'a str,
    target_cell: &'a str,
    canonical: &'a str,
    category: Category,
    value: &'a str,
}

/// Inner Ok: accepted refinement. Inner Err: attempts exhausted, with the
/// last failure as the reason. Outer Err: gateway failure, fatal.
fn refine_cell(
    gateway: &Gateway,
    refiner_model: &str,
    verifier_model: &str,
    prompts: &PromptSet,
    ctx: RefineContext<'_>,
    retries: u32,
    calls: &mut u32,
) -> Result<Result<(SubCapability, Vec<String>), String>, SynthesisError> {
    let sub_definitions = SubCapability::definitions_text_for(ctx.category);
    let mut feedback = String::new();
    let mut last_failure = String::from("no attempt was made");
    for _ in 0..retries {
        let prompt = render(
            &prompts.refiner,
            &[
                ("markdown_table", ctx.markdown_table),
                ("schema_definition", ctx.schema_definition),
                ("coarse_matrix", ctx.coarse_text),
                ("sub_capability_definitions", sub_definitions.as_str()),
                ("target_cell", ctx.target_cell),
                ("canonical_evidence", ctx.canonical),
                ("feedback", feedback.as_str()),
            ],
        );
        let response = gateway.complete(&ChatRequest::user(refiner_model, prompt))?;
        *calls += 1;
        let (sub, fragments) = match parse_refinement(&response.content, ctx.category) {
            Ok(parsed) => parsed,
            Err(problem) => {
                last_failure = problem.clone();
                feedback = format!(
                    "\n### Feedback on the previous attempt:\n- {problem}\nFollow the output shape exactly.\n"
                );
                continue;
            }
        };
        let verify_prompt = render(
            &prompts.refine_verifier,
            &[
                ("original_value", ctx.value),
                ("sub_capability", sub.id()),
                ("schema_definition", ctx.schema_definition),
                ("generated_evidence", text::fragments_text(&fragments).as_str()),
            ],
        );
        let verdict_response = gateway.complete(&ChatRequest::user(verifier_model, verify_prompt))?;
        *calls += 1;
        let verdict = parse_check_verdict(&verdict_response.content, EVIDENCE_CHECKS);
        if verdict.passed {
            return Ok(Ok((sub, fragments)));
        }
        last_failure = verdict
            .fail_rationale
            .clone()
            .unwrap_or_else(|| "verifier failed the evidence".to_string());
        feedback = verdict.feedback_text();
    }
    Ok(Err(format!("evidence rejected after {retries} attempts: {last_failure}")))
}

fn parse_refinement(content: &str, category: Category) -> Result<(SubCapability, Vec<String>), String> {
    let value = extract_structured(content).map_err(|e| e.to_string())?;
    let sub_id = value
        .get("sub_capability")
        .and_then(|v| v.as_str())
        .ok_or("output lacks a sub_capability string")?;
    let sub = SubCapability::from_id(sub_id.trim())
        .ok_or_else(|| format!("unknown sub-capability {sub_id:?}"))?;
    if sub.category() != category {
        return Err(format!(
            "sub-capability {} belongs to {}, not the assigned {}",
            sub.id(),
            sub.category().code(),
            category.code()
        ));
    }
    let raw = value
        .get("fragments")
        .and_then(|v| v.as_array())
        .ok_or("output lacks a fragments array")?;
    let mut fragments = Vec::with_capacity(raw.len());
    for item in raw {
        let s = item.as_str().ok_or("fragments must be strings")?.trim();
        if s.is_empty() {
            return Err("fragments must be non-empty".to_string());
        }
        if s.contains('\n') {
            return Err("fragments must be single lines so the writer can embed them verbatim".to_string());
        }
        fragments.push(s.to_string());
    }
    if fragments.is_empty() {
        return Err("fragments must be non-empty".to_string());
    }
    Ok((sub, fragments))
}
