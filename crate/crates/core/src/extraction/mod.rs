//! Forward task runner: prompt a candidate model with a synthesized
//! document and parse its answer back into prediction rows.

mod markdown;

pub use markdown::{parse_markdown_table, render_markdown_rows, ParsedRows};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{extract_structured, ChatRequest, Gateway, GatewayError};
use crate::model::{normalize_cell, ModelError, Schema};
use crate::prompts::{render, PromptSet};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no table in model output: {0}")]
    NoTable(String),
    #[error("structured output malformed: {0}")]
    BadStructure(String),
    #[error("output unparseable after {attempts} attempts: {detail}")]
    Unparseable { attempts: u32, detail: String },
}

/// Answer format the candidate model is asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    MarkdownTable,
    StructuredRows,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<OutputFormat> {
        match s.trim() {
            "markdown_table" => Some(OutputFormat::MarkdownTable),
            "structured_rows" => Some(OutputFormat::StructuredRows),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::MarkdownTable => "markdown_table",
            OutputFormat::StructuredRows => "structured_rows",
        }
    }
}

/// Whether the document is sent whole or section by section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chunking {
    None,
    Sectioned,
}

impl Chunking {
    pub fn parse(s: &str) -> Option<Chunking> {
        match s.trim() {
            "none" => Some(Chunking::None),
            "sectioned" => Some(Chunking::Sectioned),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Chunking::None => "none",
            Chunking::Sectioned => "sectioned",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub format: OutputFormat,
    pub chunking: Chunking,
    /// Extra attempts per chunk after a parse failure; each retry feeds the
    /// parse error back to the model.
    pub max_retries: u32,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            format: OutputFormat::MarkdownTable,
            chunking: Chunking::None,
            max_retries: 2,
        }
    }
}

/// Extraction result: prediction rows in schema column order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub rows: Vec<Vec<Option<String>>>,
    /// Backend calls spent, retries included.
    pub calls: u32,
    pub warnings: Vec<String>,
    pub raw_responses: Vec<String>,
}

/// Prediction artifact written after a run: the extracted rows plus enough
/// context to evaluate and audit them later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub model: String,
    pub rows: Vec<Vec<Option<String>>>,
    pub raw_responses: Vec<String>,
    pub calls: u32,
    pub warnings: Vec<String>,
}

impl Prediction {
    pub fn new(model: &str, outcome: ExtractionOutcome) -> Prediction {
        Prediction {
            model: model.to_string(),
            rows: outcome.rows,
            raw_responses: outcome.raw_responses,
            calls: outcome.calls,
            warnings: outcome.warnings,
        }
    }
}

/// Extraction prompt for one document (or chunk). The schema block keeps
/// resolution rules but never cross-field constraints; those would leak the
/// answer to conflict cells.
pub fn build_extraction_prompt(
    prompts: &PromptSet,
    schema: &Schema,
    document: &str,
    format: OutputFormat,
    feedback: &str,
) -> String {
    let schema_block = schema.specification_text(false);
    let names: Vec<&str> = schema.attributes.iter().map(|a| a.name.as_str()).collect();
    let directive = match format {
        OutputFormat::MarkdownTable => format!(
            "Output only a markdown table. The header row must be exactly: | {} |. Output one data row per entity and write NULL in missing cells.",
            names.join(" | ")
        ),
        OutputFormat::StructuredRows => format!(
            "Output only a JSON object of the shape {{\"rows\": [{{\"{}\": \"<value>\"}}]}} with one entry per entity, every attribute present in each entry, and JSON null for missing values.",
            names.join("\": \"<value>\", \"")
        ),
    };
    render(
        &prompts.extractor,
        &[
            ("schema_definition", schema_block.as_str()),
            ("document", document),
            ("format_directive", directive.as_str()),
            ("feedback", feedback),
        ],
    )
}

/// Runs the forward extraction task over one document.
///
/// Each chunk is prompted independently; a response that fails to parse is
/// retried up to `max_retries` times with the error quoted back to the
/// model, after which the run fails. With sectioned chunking, rows from
/// different chunks are merged by normalized key: missing cells fill in,
/// conflicting cells keep the first-seen value and record a warning.
pub fn run_extraction(
    gateway: &Gateway,
    model: &str,
    prompts: &PromptSet,
    schema: &Schema,
    document: &str,
    cfg: &ExtractionConfig,
) -> Result<ExtractionOutcome, ExtractionError> {
    schema.validate()?;
    let chunks = chunk_document(document, cfg.chunking);
    let mut calls = 0u32;
    let mut warnings = Vec::new();
    let mut raw_responses = Vec::new();
    let mut chunk_rows: Vec<Vec<Vec<Option<String>>>> = Vec::new();
    for chunk in &chunks {
        let mut feedback = String::new();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            calls += 1;
            let prompt = build_extraction_prompt(prompts, schema, chunk, cfg.format, &feedback);
            let resp = gateway.complete(&ChatRequest::user(model, prompt))?;
            raw_responses.push(resp.content.clone());
            match parse_response(&resp.content, cfg.format, schema) {
                Ok(parsed) => {
                    warnings.extend(parsed.repairs);
                    chunk_rows.push(parsed.rows);
                    break;
                }
                Err(e) if attempt <= cfg.max_retries => {
                    feedback = format!(
                        "\n### Previous Attempt Feedback:\nThe previous output could not be parsed: {e}. Follow the output format exactly.\n"
                    );
                }
                Err(e) => {
                    return Err(ExtractionError::Unparseable { attempts: attempt, detail: e.to_string() })
                }
            }
        }
    }
    let rows = merge_chunk_rows(chunk_rows, schema.key_attribute_index, &mut warnings);
    Ok(ExtractionOutcome { rows, calls, warnings, raw_responses })
}

fn parse_response(
    content: &str,
    format: OutputFormat,
    schema: &Schema,
) -> Result<ParsedRows, ExtractionError> {
    match format {
        OutputFormat::MarkdownTable => {
            let header: Vec<String> = schema.attributes.iter().map(|a| a.name.clone()).collect();
            parse_markdown_table(content, &header)
        }
        OutputFormat::StructuredRows => parse_structured_rows(content, schema),
    }
}

fn parse_structured_rows(content: &str, schema: &Schema) -> Result<ParsedRows, ExtractionError> {
    let value = extract_structured(content).map_err(|e| ExtractionError::BadStructure(e.to_string()))?;
    let rows_value = value
        .get("rows")
        .and_then(|r| r.as_array())
        .ok_or_else(|| ExtractionError::BadStructure("top-level \"rows\" array is missing".into()))?;
    let mut rows = Vec::new();
    let mut repairs = Vec::new();
    for (idx, row) in rows_value.iter().enumerate() {
        let Some(obj) = row.as_object() else {
            repairs.push(format!("row {idx}: not an object, skipped"));
            continue;
        };
        let cells = schema
            .attributes
            .iter()
            .map(|attr| match obj.get(&attr.name) {
                None | Some(serde_json::Value::Null) => None,
                Some(serde_json::Value::String(s)) => {
                    let s = s.trim();
                    if s.is_empty() || s.eq_ignore_ascii_case("null") {
                        None
                    } else {
                        Some(s.to_string())
                    }
                }
                Some(serde_json::Value::Number(n)) => Some(n.to_string()),
                Some(serde_json::Value::Bool(b)) => Some(b.to_string()),
                Some(other) => {
                    repairs.push(format!(
                        "row {idx}: attribute {:?} holds {other}, treated as missing",
                        attr.name
                    ));
                    None
                }
            })
            .collect();
        rows.push(cells);
    }
    Ok(ParsedRows { rows, repairs })
}

/// Splits a document at `# ` headings. Text before the first heading forms
/// its own chunk; a document without headings is one chunk.
fn chunk_document(document: &str, chunking: Chunking) -> Vec<String> {
    match chunking {
        Chunking::None => vec![document.to_string()],
        Chunking::Sectioned => {
            let mut chunks: Vec<String> = Vec::new();
            let mut current = String::new();
            for line in document.lines() {
                if line.starts_with("# ") && !current.trim().is_empty() {
                    chunks.push(std::mem::take(&mut current));
                }
                current.push_str(line);
                current.push('\n');
            }
            if !current.trim().is_empty() {
                chunks.push(current);
            }
            if chunks.is_empty() {
                chunks.push(document.to_string());
            }
            chunks
        }
    }
}

/// Concatenates per-chunk rows, merging rows that share a normalized key:
/// present cells win over missing ones, conflicts keep the first value.
fn merge_chunk_rows(
    chunk_rows: Vec<Vec<Vec<Option<String>>>>,
    key_col: usize,
    warnings: &mut Vec<String>,
) -> Vec<Vec<Option<String>>> {
    if chunk_rows.len() == 1 {
        return chunk_rows.into_iter().next().expect("length checked");
    }
    let mut merged: Vec<Vec<Option<String>>> = Vec::new();
    let mut index_of_key: std::collections::BTreeMap<String, usize> = std::collections::BTreeMap::new();
    for rows in chunk_rows {
        for row in rows {
            let key = row.get(key_col).and_then(|c| c.as_deref()).map(normalize_cell);
            let Some(key) = key else {
                merged.push(row);
                continue;
            };
            match index_of_key.get(&key) {
                None => {
                    index_of_key.insert(key, merged.len());
                    merged.push(row);
                }
                Some(&at) => {
                    for (j, cell) in row.into_iter().enumerate() {
                        match (&merged[at][j], cell) {
                            (None, Some(v)) => merged[at][j] = Some(v),
                            (Some(old), Some(new)) if normalize_cell(old) != normalize_cell(&new) => {
                                warnings.push(format!(
                                    "key {key:?}: chunks disagree on column {j} ({old:?} vs {new:?}), kept the first"
                                ));
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    merged
}
