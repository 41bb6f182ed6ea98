use super::ExtractionError;

/// Prediction rows recovered from model output, plus notes about any
/// repairs (padded or truncated rows) applied along the way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRows {
    pub rows: Vec<Vec<Option<String>>>,
    pub repairs: Vec<String>,
}

/// Parses a markdown pipe table out of free-form model output.
///
/// The first pipe row is dropped as the header when a separator row is
/// present or when its cells equal the expected attribute names. Rows are
/// repaired to the schema arity: short rows are padded with missing values,
/// long rows truncated, both recorded as repairs. Empty cells and the
/// literal `NULL` (any case) become missing values.
pub fn parse_markdown_table(
    text: &str,
    header: &[String],
) -> Result<ParsedRows, ExtractionError> {
    let want = header.len();
    let mut data: Vec<Vec<String>> = Vec::new();
    let mut saw_separator = false;
    for line in text.lines() {
        let Some(cells) = split_pipe_row(line) else { continue };
        if is_separator_row(&cells) {
            saw_separator = true;
            continue;
        }
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        data.push(cells);
    }
    if data.is_empty() {
        return Err(ExtractionError::NoTable(
            "output contains no markdown table rows".into(),
        ));
    }
    let first_is_header = saw_separator || row_matches_header(&data[0], header);
    let skip = usize::from(first_is_header);
    let mut rows = Vec::new();
    let mut repairs = Vec::new();
    for (idx, mut cells) in data.into_iter().skip(skip).enumerate() {
        if cells.len() < want {
            repairs.push(format!(
                "row {idx}: padded from {} to {want} cells",
                cells.len()
            ));
            cells.resize(want, String::new());
        } else if cells.len() > want {
            repairs.push(format!(
                "row {idx}: truncated from {} to {want} cells",
                cells.len()
            ));
            cells.truncate(want);
        }
        rows.push(cells.into_iter().map(cell_to_value).collect());
    }
    Ok(ParsedRows { rows, repairs })
}

/// Renders prediction rows back to a markdown table, missing values as
/// empty cells. Inverse of [`parse_markdown_table`] for well-formed values.
pub fn render_markdown_rows(header: &[String], rows: &[Vec<Option<String>>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
    for row in rows {
        let cells: Vec<&str> = row.iter().map(|c| c.as_deref().unwrap_or("")).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

fn cell_to_value(cell: String) -> Option<String> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("null") {
        None
    } else {
        Some(cell)
    }
}

fn row_matches_header(cells: &[String], header: &[String]) -> bool {
    cells.len() == header.len()
        && cells
            .iter()
            .zip(header)
            .all(|(c, h)| c.eq_ignore_ascii_case(h.trim()))
}

fn split_pipe_row(line: &str) -> Option<Vec<String>> {
    let trimmed = line.trim();
    if !trimmed.contains('|') {
        return None;
    }
    let inner = trimmed.strip_prefix('|').unwrap_or(trimmed);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    Some(inner.split('|').map(|c| c.trim().to_string()).collect())
}

fn is_separator_row(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells
            .iter()
            .all(|c| !c.is_empty() && c.chars().all(|ch| matches!(ch, '-' | ':')))
}
