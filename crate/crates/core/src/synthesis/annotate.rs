//! Stage 1: coarse capability annotation of every table cell.

use serde::{Deserialize, Serialize};

use super::{render as text, SynthesisError};
use crate::gateway::{extract_structured, ChatRequest, Gateway};
use crate::model::{Category, CellRef, Schema, Table};
use crate::prompts::{render, PromptSet};

/// Coarse category grid plus bookkeeping from the annotation loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationOutcome {
    pub categories: Vec<Vec<Category>>,
    pub calls: u32,
    /// Cells still unassigned after the final round, defaulted to EMPTY.
    pub fallback_cells: Vec<CellRef>,
    /// Invalid or ignored assignments, one note each.
    pub notes: Vec<String>,
}

/// Annotates every cell with a coarse capability category.
///
/// The annotator gets up to `rounds` calls. After each call a deterministic
/// checker merges valid assignments into the grid (first answer wins) and
/// re-prompts with the list of still-open cells; whatever remains open after
/// the last round falls back to EMPTY. Missing cells never reach the model:
/// they are pre-assigned EF, the only category that applies to an absent
/// value, and EF on a present value is rejected as inconsistent. Conflict
/// resolution labels are only accepted on attributes that actually carry a
/// resolution rule or cross-field constraint.
pub fn annotation_loop(
    gateway: &Gateway,
    model: &str,
    prompts: &PromptSet,
    schema: &Schema,
    table: &Table,
    rounds: u32,
) -> Result<AnnotationOutcome, SynthesisError> {
    assert!(rounds >= 1, "annotation needs at least one round");
    let n_rows = table.n_rows();
    let n_cols = table.n_cols();
    let constrained = schema.constrained_attributes();
    let mut grid: Vec<Vec<Option<Category>>> = vec![vec![None; n_cols]; n_rows];
    for (r, row) in table.rows().iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if cell.is_none() {
                grid[r][c] = Some(Category::EmptyFaithfulness);
            }
        }
    }

    let header: Vec<String> = schema.attributes.iter().map(|a| a.name.clone()).collect();
    let markdown_table = table.to_markdown(&header);
    let metadata = schema.specification_text(true);
    let definitions = Category::definitions_text();
    let mut notes = Vec::new();
    let mut calls = 0u32;
    let mut feedback = String::new();

    for _ in 0..rounds {
        let prompt = render(
            &prompts.annotator,
            &[
                ("markdown_table", markdown_table.as_str()),
                ("table_metadata", metadata.as_str()),
                ("capability_definitions", definitions.as_str()),
                ("feedback", feedback.as_str()),
            ],
        );
        let response = gateway.complete(&ChatRequest::user(model, prompt))?;
        calls += 1;

        let mut round_notes = Vec::new();
        match extract_structured(&response.content) {
            Err(e) => round_notes.push(format!("annotator response unusable: {e}")),
            Ok(value) => {
                let assignments = value.get("assignments").and_then(|v| v.as_object());
                match assignments {
                    None => round_notes.push("annotator response lacks an assignments object".into()),
                    Some(map) => {
                        for (entity, attrs) in map {
                            let Some(row) = find_row(table, schema.key_attribute_index, entity) else {
                                round_notes.push(format!("unknown entity {entity:?} ignored"));
                                continue;
                            };
                            let Some(attrs) = attrs.as_object() else {
                                round_notes.push(format!("entity {entity:?} holds a non-object, ignored"));
                                continue;
                            };
                            for (attr, code) in attrs {
                                let Some(col) = schema.attribute_index(attr) else {
                                    round_notes.push(format!("unknown attribute {attr:?} ignored"));
                                    continue;
                                };
                                let Some(code) = code.as_str() else {
                                    round_notes.push(format!("non-string code for {entity:?}.{attr:?} ignored"));
                                    continue;
                                };
                                let Some(cat) = Category::from_code(code) else {
                                    round_notes.push(format!("unknown capability code {code:?} for {entity:?}.{attr:?}"));
                                    continue;
                                };
                                if cat == Category::EmptyFaithfulness && table.cell(row, col).is_some() {
                                    round_notes.push(format!(
                                        "EF rejected for {entity:?}.{attr:?}: the cell has a value"
                                    ));
                                    continue;
                                }
                                if cat == Category::ConflictResolution && !constrained.contains(&col) {
                                    round_notes.push(format!(
                                        "CR rejected for {entity:?}.{attr:?}: the attribute has no resolution rule or constraint"
                                    ));
                                    continue;
                                }
                                if grid[row][col].is_none() {
                                    grid[row][col] = Some(cat);
                                }
                            }
                        }
                    }
                }
            }
        }

        let holes = open_cells(&grid);
        notes.extend(round_notes.iter().cloned());
        if holes.is_empty() {
            return Ok(AnnotationOutcome {
                categories: finish(grid),
                calls,
                fallback_cells: Vec::new(),
                notes,
            });
        }
        feedback = hole_feedback(schema, table, &holes, &round_notes);
    }

    let fallback_cells = open_cells(&grid);
    Ok(AnnotationOutcome { categories: finish(grid), calls, fallback_cells, notes })
}

fn find_row(table: &Table, key_col: usize, entity: &str) -> Option<usize> {
    let exact = table
        .rows()
        .iter()
        .position(|row| row[key_col].as_deref() == Some(entity));
    exact.or_else(|| {
        table.rows().iter().position(|row| {
            row[key_col]
                .as_deref()
                .is_some_and(|k| k.trim().eq_ignore_ascii_case(entity.trim()))
        })
    })
}

fn open_cells(grid: &[Vec<Option<Category>>]) -> Vec<CellRef> {
    let mut holes = Vec::new();
    for (r, row) in grid.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if cell.is_none() {
                holes.push(CellRef { row: r, col: c });
            }
        }
    }
    holes
}

fn finish(grid: Vec<Vec<Option<Category>>>) -> Vec<Vec<Category>> {
    grid.into_iter()
        .map(|row| row.into_iter().map(|c| c.unwrap_or(Category::Empty)).collect())
        .collect()
}

fn hole_feedback(schema: &Schema, table: &Table, holes: &[CellRef], notes: &[String]) -> String {
    let mut out = String::from("\n### Feedback on the previous response:\nThese cells are still missing a valid assignment:\n");
    for hole in holes {
        out.push_str(&format!(
            "- entity \"{}\", attribute \"{}\"\n",
            text::entity_name(table, schema.key_attribute_index, hole.row),
            schema.attributes[hole.col].name
        ));
    }
    for note in notes {
        out.push_str(&format!("- note: {note}\n"));
    }
    out.push_str("Return the assignments object again covering at least the listed cells.\n");
    out
}
