//! Shared data model: schemas, tables, capability labels, evidence,
//! writing plans, documents, and the cell normalizer used by evaluation.

mod capability;
mod document;
mod evidence;
mod normalize;
mod plan;
mod schema;
mod table;

pub use capability::{Category, CapabilityLabel, CapabilityMatrix, SubCapability};
pub use document::{count_tokens, Section, SynthDocument};
pub use evidence::{canonical_evidence, validate_evidence_set, CellRef, EvidenceItem};
pub use normalize::{normalize_cell, NULL_TOKEN};
pub use plan::{PlanSection, WritingPlan};
pub use schema::{AttributeSpec, CompareOp, CrossConstraint, DataType, ResolutionKind, ResolutionRule, Schema};
pub use table::{inject_missing_cells, Table};

use thiserror::Error;

/// Validation failures raised by the data-model constructors.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("illegal capability label: {0}")]
    IllegalLabel(String),
    #[error("invalid capability matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),
    #[error("invalid writing plan: {0}")]
    InvalidPlan(String),
    #[error("cell value is missing")]
    NullValue,
    #[error("fraction must lie in [0, 1), got {0}")]
    FractionOutOfRange(f64),
}
