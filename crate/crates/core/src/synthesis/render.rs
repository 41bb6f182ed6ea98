//! Plain-text renderings of pipeline state for prompt placeholders.

use crate::model::{Category, EvidenceItem, Schema, Table};

/// Display name of one row's entity: its key cell, or a positional label
/// when the key is somehow absent.
pub fn entity_name(table: &Table, key_col: usize, row: usize) -> String {
    table
        .cell(row, key_col)
        .map(str::to_string)
        .unwrap_or_else(|| format!("row {}", row + 1))
}

/// Markdown grid of coarse capability codes, same shape as the table.
pub fn coarse_matrix_text(schema: &Schema, categories: &[Vec<Category>]) -> String {
    let mut out = String::from("|");
    for attr in &schema.attributes {
        out.push_str(&format!(" {} |", attr.name));
    }
    out.push_str("\n|");
    for _ in &schema.attributes {
        out.push_str(" --- |");
    }
    for row in categories {
        out.push_str("\n|");
        for cat in row {
            out.push_str(&format!(" {} |", cat.code()));
        }
    }
    out
}

/// One-line description of the cell the refiner must work on.
pub fn target_cell_text(
    schema: &Schema,
    table: &Table,
    row: usize,
    col: usize,
    category: Category,
) -> String {
    let entity = entity_name(table, schema.key_attribute_index, row);
    let value = table.cell(row, col).unwrap_or("NULL");
    format!(
        "row {} (entity \"{}\"), attribute \"{}\", value \"{}\", coarse capability {}",
        row + 1,
        entity,
        schema.attributes[col].name,
        value,
        category.code()
    )
}

/// Numbered fragment listing for verifier prompts.
pub fn fragments_text(fragments: &[String]) -> String {
    fragments
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{}. \"{}\"", i + 1, f))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Evidence listing for the planner and writer prompts: id, sub-capability,
/// and the verbatim fragments the prose must carry.
pub fn evidence_list_text(items: &[&EvidenceItem]) -> String {
    let mut out = String::new();
    for item in items {
        let sub = item
            .sub_capability
            .map(|s| s.id().to_string())
            .unwrap_or_else(|| "direct".to_string());
        out.push_str(&format!("- id: {} | kind: {}\n", item.id, sub));
        for fragment in &item.fragments {
            out.push_str(&format!("  fragment: \"{fragment}\"\n"));
        }
    }
    out
}

/// Schema specification plus the rendered table, the verifier's view of the
/// ground truth.
pub fn table_and_schema_text(schema: &Schema, table: &Table) -> String {
    let header: Vec<String> = schema.attributes.iter().map(|a| a.name.clone()).collect();
    format!("{}\n\n{}", schema.specification_text(true), table.to_markdown(&header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeSpec, CellRef, DataType, SubCapability};

    fn schema() -> Schema {
        Schema {
            entity_type: "company".into(),
            attributes: vec![
                AttributeSpec {
                    name: "company".into(),
                    description: "name".into(),
                    data_type: DataType::Text,
                    unit: None,
                    format: None,
                    examples: vec![],
                },
                AttributeSpec {
                    name: "revenue".into(),
                    description: "annual revenue".into(),
                    data_type: DataType::Integer,
                    unit: Some("USD".into()),
                    format: None,
                    examples: vec![],
                },
            ],
            key_attribute_index: 0,
            cross_constraints: vec![],
            resolution_rules: vec![],
        }
    }

    #[test]
    fn coarse_grid_renders_codes() {
        let grid = vec![
            vec![Category::Empty, Category::ReasoningInference],
            vec![Category::Empty, Category::TransformAlignment],
        ];
        let text = coarse_matrix_text(&schema(), &grid);
        assert_eq!(
            text,
            "| company | revenue |\n| --- | --- |\n| EMPTY | RI |\n| EMPTY | TA |"
        );
    }

    #[test]
    fn target_cell_names_entity_and_attribute() {
        let table = Table::new(vec![vec![Some("alpha".into()), Some("10".into())]]).unwrap();
        let text = target_cell_text(&schema(), &table, 0, 1, Category::ReasoningInference);
        assert_eq!(
            text,
            "row 1 (entity \"alpha\"), attribute \"revenue\", value \"10\", coarse capability RI"
        );
    }

    #[test]
    fn evidence_listing_includes_ids_and_fragments() {
        let items = vec![
            EvidenceItem {
                id: "e1".into(),
                cell: CellRef { row: 0, col: 0 },
                sub_capability: None,
                fragments: vec!["alpha exists".into()],
            },
            EvidenceItem {
                id: "e2".into(),
                cell: CellRef { row: 0, col: 1 },
                sub_capability: Some(SubCapability::ArithmeticReasoning),
                fragments: vec!["part one is 4".into(), "part two is 6".into()],
            },
        ];
        let refs: Vec<&EvidenceItem> = items.iter().collect();
        let text = evidence_list_text(&refs);
        assert!(text.contains("- id: e1 | kind: direct"));
        assert!(text.contains("- id: e2 | kind: arithmetic_reasoning"));
        assert!(text.contains("  fragment: \"part one is 4\""));
        assert!(text.contains("  fragment: \"part two is 6\""));
    }
}
