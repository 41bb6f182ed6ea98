use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Schema};

/// Ground-truth (or predicted) table. `None` marks a missing value.
///
/// Raw values are stored exactly as given; normalization happens only at
/// evaluation time. Values never contain `|` or newlines so the table can
/// round-trip through its markdown form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct Table {
    rows: Vec<Vec<Option<String>>>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    rows: Vec<Vec<Option<String>>>,
}

impl TryFrom<TableRepr> for Table {
    type Error = ModelError;
    fn try_from(repr: TableRepr) -> Result<Self, ModelError> {
        Table::new(repr.rows)
    }
}

impl From<Table> for TableRepr {
    fn from(t: Table) -> TableRepr {
        TableRepr { rows: t.rows }
    }
}

impl Table {
    pub fn new(rows: Vec<Vec<Option<String>>>) -> Result<Self, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::InvalidTable("no rows".into()));
        }
        let width = rows[0].len();
        if width == 0 {
            return Err(ModelError::InvalidTable("no columns".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(ModelError::InvalidTable(format!(
                    "row {} has {} cells, expected {}",
                    i,
                    row.len(),
                    width
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    if v.trim().is_empty() {
                        return Err(ModelError::InvalidTable(format!(
                            "cell ({i}, {j}) holds an empty string; use null for missing values"
                        )));
                    }
                    if v.contains('|') || v.contains('\n') {
                        return Err(ModelError::InvalidTable(format!(
                            "cell ({i}, {j}) contains a markdown delimiter"
                        )));
                    }
                }
            }
        }
        Ok(Table { rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.rows[row][col].as_deref()
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.rows
    }

    /// Checks the table against a schema: column count must match and key
    /// cells must be present and pairwise distinct (row alignment keys on
    /// them).
    pub fn validate_against(&self, schema: &Schema) -> Result<(), ModelError> {
        schema.validate()?;
        if self.n_cols() != schema.attributes.len() {
            return Err(ModelError::InvalidTable(format!(
                "table has {} columns, schema defines {}",
                self.n_cols(),
                schema.attributes.len()
            )));
        }
        let k = schema.key_attribute_index;
        let mut keys = std::collections::BTreeSet::new();
        for (i, row) in self.rows.iter().enumerate() {
            match &row[k] {
                None => {
                    return Err(ModelError::InvalidTable(format!(
                        "row {i} has a missing key value"
                    )))
                }
                Some(v) => {
                    if !keys.insert(v.as_str()) {
                        return Err(ModelError::InvalidTable(format!(
                            "duplicate key value {v:?} in row {i}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Renders the table as a markdown pipe table. Missing values become
    /// empty cells.
    pub fn to_markdown(&self, header: &[String]) -> String {
        let mut out = String::new();
        out.push_str(&format!("| {} |\n", header.join(" | ")));
        out.push_str(&format!(
            "|{}\n",
            " --- |".repeat(header.len())
        ));
        for row in &self.rows {
            let cells: Vec<&str> = row.iter().map(|c| c.as_deref().unwrap_or("")).collect();
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        out
    }

    /// Parses CSV text whose first record is the header. Empty fields become
    /// missing values.
    pub fn from_csv(text: &str) -> Result<(Vec<String>, Table), ModelError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| ModelError::InvalidTable(format!("bad csv header: {e}")))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| ModelError::InvalidTable(format!("bad csv row: {e}")))?;
            let row: Vec<Option<String>> = record
                .iter()
                .map(|f| {
                    let f = f.trim();
                    if f.is_empty() {
                        None
                    } else {
                        Some(f.to_string())
                    }
                })
                .collect();
            rows.push(row);
        }
        Ok((header, Table::new(rows)?))
    }

    pub fn to_csv(&self, header: &[String]) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("write to Vec cannot fail");
        for row in &self.rows {
            let cells: Vec<&str> = row.iter().map(|c| c.as_deref().unwrap_or("")).collect();
            writer.write_record(&cells).expect("write to Vec cannot fail");
        }
        String::from_utf8(writer.into_inner().expect("flush to Vec cannot fail"))
            .expect("csv output is utf-8")
    }
}

/// Blanks a seeded random sample of cells so the resulting case probes
/// missing-value faithfulness.
///
/// Key cells and cells of attributes referenced by cross-field constraints
/// or resolution rules are never touched; both would make the remaining
/// table undecidable. Exactly `floor(fraction * eligible)` cells are
/// cleared, chosen by a ChaCha stream seeded from `seed`, so the same
/// inputs always blank the same cells.
pub fn inject_missing_cells(
    schema: &Schema,
    table: &Table,
    fraction: f64,
    seed: u64,
) -> Result<(Table, Vec<(usize, usize)>), ModelError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(ModelError::FractionOutOfRange(fraction));
    }
    table.validate_against(schema)?;
    let has_candidate = table.rows().iter().enumerate().any(|(_, row)| {
        row.iter()
            .enumerate()
            .any(|(j, c)| j != schema.key_attribute_index && c.is_some())
    });
    if !has_candidate {
        return Err(ModelError::InvalidTable(
            "table has no non-key, non-missing cell to blank".into(),
        ));
    }
    let protected = schema.constrained_attributes();
    let mut eligible: Vec<(usize, usize)> = Vec::new();
    for (i, row) in table.rows().iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if j == schema.key_attribute_index || protected.contains(&j) {
                continue;
            }
            if cell.is_some() {
                eligible.push((i, j));
            }
        }
    }
    let count = (fraction * eligible.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..count {
        let pick = rng.random_range(k..eligible.len());
        eligible.swap(k, pick);
    }
    let mut blanked: Vec<(usize, usize)> = eligible.into_iter().take(count).collect();
    blanked.sort_unstable();
    let mut rows = table.rows().to_vec();
    for &(i, j) in &blanked {
        rows[i][j] = None;
    }
    Ok((Table::new(rows)?, blanked))
}

#[cfg(test)]
mod tests {
    use super::super::{AttributeSpec, DataType};
    use super::*;

    fn plain_schema(cols: usize) -> Schema {
        Schema {
            entity_type: "item".into(),
            attributes: (0..cols)
                .map(|j| AttributeSpec {
                    name: format!("a{j}"),
                    description: format!("attribute {j}"),
                    data_type: DataType::Text,
                    unit: None,
                    format: None,
                    examples: vec![],
                })
                .collect(),
            key_attribute_index: 0,
            cross_constraints: vec![],
            resolution_rules: vec![],
        }
    }

    fn table_3x3() -> Table {
        Table::new(vec![
            vec![Some("k1".into()), Some("b1".into()), Some("c1".into())],
            vec![Some("k2".into()), Some("b2".into()), Some("c2".into())],
            vec![Some("k3".into()), Some("b3".into()), Some("c3".into())],
        ])
        .unwrap()
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = Table::new(vec![vec![Some("a".into())], vec![]]);
        assert!(matches!(err, Err(ModelError::InvalidTable(_))));
    }

    #[test]
    fn empty_string_cell_rejected() {
        let err = Table::new(vec![vec![Some("  ".into())]]);
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_keys_rejected() {
        let schema = plain_schema(2);
        let t = Table::new(vec![
            vec![Some("k".into()), Some("x".into())],
            vec![Some("k".into()), Some("y".into())],
        ])
        .unwrap();
        assert!(t.validate_against(&schema).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_missing_values() {
        let header = vec!["a0".to_string(), "a1".to_string()];
        let t = Table::new(vec![
            vec![Some("k1".into()), None],
            vec![Some("k2".into()), Some("7".into())],
        ])
        .unwrap();
        let csv = t.to_csv(&header);
        let (h2, t2) = Table::from_csv(&csv).unwrap();
        assert_eq!(h2, header);
        assert_eq!(t2, t);
    }

    #[test]
    fn markdown_renders_missing_as_empty() {
        let t = Table::new(vec![vec![Some("k".into()), None]]).unwrap();
        let md = t.to_markdown(&["a".into(), "b".into()]);
        assert_eq!(md, "| a | b |\n| --- | --- |\n| k |  |\n");
    }

    #[test]
    fn inject_blanks_exactly_floor_of_fraction() {
        let schema = plain_schema(3);
        let (out, blanked) = inject_missing_cells(&schema, &table_3x3(), 0.25, 1).unwrap();
        // 6 eligible cells, floor(0.25 * 6) = 1
        assert_eq!(blanked.len(), 1);
        let (i, j) = blanked[0];
        assert_ne!(j, 0);
        assert!(out.cell(i, j).is_none());
        let missing = out
            .rows()
            .iter()
            .flatten()
            .filter(|c| c.is_none())
            .count();
        assert_eq!(missing, 1);
    }

    #[test]
    fn inject_is_deterministic_per_seed_and_varies_across_seeds() {
        let schema = plain_schema(3);
        let t = table_3x3();
        let (a, picks_a) = inject_missing_cells(&schema, &t, 0.5, 42).unwrap();
        let (b, picks_b) = inject_missing_cells(&schema, &t, 0.5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(picks_a, picks_b);
        let distinct: std::collections::BTreeSet<Vec<(usize, usize)>> = (0..64)
            .map(|seed| inject_missing_cells(&schema, &t, 0.5, seed).unwrap().1)
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn inject_never_touches_key_or_constrained_columns() {
        let mut schema = plain_schema(3);
        schema.resolution_rules.push(super::super::ResolutionRule {
            attribute: "a2".into(),
            kind: super::super::ResolutionKind::RuleBased,
            instruction: "prefer the larger value".into(),
        });
        let (out, blanked) = inject_missing_cells(&schema, &table_3x3(), 0.9, 7).unwrap();
        // only column 1 is eligible: floor(0.9 * 3) = 2 cells
        assert_eq!(blanked.len(), 2);
        assert!(blanked.iter().all(|&(_, j)| j == 1));
        for i in 0..3 {
            assert!(out.cell(i, 0).is_some());
            assert!(out.cell(i, 2).is_some());
        }
    }

    #[test]
    fn inject_rejects_out_of_range_fraction() {
        let schema = plain_schema(3);
        for f in [1.0, -0.1, f64::NAN] {
            assert!(matches!(
                inject_missing_cells(&schema, &table_3x3(), f, 0),
                Err(ModelError::FractionOutOfRange(_))
            ));
        }
    }
}
