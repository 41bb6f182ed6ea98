use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Value domain of a table attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    Text,
    Integer,
    Decimal,
    Date,
    Boolean,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataType::Text => "text",
            DataType::Integer => "integer",
            DataType::Decimal => "decimal",
            DataType::Date => "date",
            DataType::Boolean => "boolean",
        };
        f.write_str(s)
    }
}

/// One column of the target table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub description: String,
    pub data_type: DataType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
}

/// Comparison operator in a cross-field constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Eq => "=",
            CompareOp::Ge => ">=",
            CompareOp::Gt => ">",
        };
        f.write_str(s)
    }
}

/// Relation that must hold between two attributes of the same row.
///
/// Constraints steer evidence synthesis (conflicting sources must stay
/// decidable) and are deliberately absent from extraction prompts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossConstraint {
    pub left: String,
    pub op: CompareOp,
    pub right: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Strategy an extractor must apply when sources conflict on an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionKind {
    RuleBased,
    ConstraintBased,
    SourceAware,
}

impl fmt::Display for ResolutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResolutionKind::RuleBased => "rule_based",
            ResolutionKind::ConstraintBased => "constraint_based",
            ResolutionKind::SourceAware => "source_aware",
        };
        f.write_str(s)
    }
}

/// Conflict-resolution instruction attached to one attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolutionRule {
    pub attribute: String,
    pub kind: ResolutionKind,
    pub instruction: String,
}

/// Target table definition: what each row describes and what each column
/// must contain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    /// What one row stands for, e.g. "company" or "clinical trial".
    pub entity_type: String,
    pub attributes: Vec<AttributeSpec>,
    /// Column whose values identify rows during evaluation alignment.
    #[serde(default)]
    pub key_attribute_index: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cross_constraints: Vec<CrossConstraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resolution_rules: Vec<ResolutionRule>,
}

impl Schema {
    /// Checks structural consistency. Attribute names must be unique,
    /// non-empty, and free of `|` and newlines (they appear verbatim in
    /// markdown tables); constraint and rule references must resolve.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.entity_type.trim().is_empty() {
            return Err(ModelError::InvalidSchema("entity_type is empty".into()));
        }
        if self.attributes.is_empty() {
            return Err(ModelError::InvalidSchema("no attributes".into()));
        }
        let mut seen = BTreeSet::new();
        for attr in &self.attributes {
            if attr.name.trim().is_empty() {
                return Err(ModelError::InvalidSchema("attribute with empty name".into()));
            }
            if attr.name.contains('|') || attr.name.contains('\n') {
                return Err(ModelError::InvalidSchema(format!(
                    "attribute name {:?} contains a markdown delimiter",
                    attr.name
                )));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(ModelError::InvalidSchema(format!(
                    "duplicate attribute name {:?}",
                    attr.name
                )));
            }
        }
        if self.key_attribute_index >= self.attributes.len() {
            return Err(ModelError::InvalidSchema(format!(
                "key_attribute_index {} out of range for {} attributes",
                self.key_attribute_index,
                self.attributes.len()
            )));
        }
        for c in &self.cross_constraints {
            for name in [&c.left, &c.right] {
                if self.attribute_index(name).is_none() {
                    return Err(ModelError::InvalidSchema(format!(
                        "cross constraint references unknown attribute {name:?}"
                    )));
                }
            }
        }
        for r in &self.resolution_rules {
            if self.attribute_index(&r.attribute).is_none() {
                return Err(ModelError::InvalidSchema(format!(
                    "resolution rule references unknown attribute {:?}",
                    r.attribute
                )));
            }
            if r.instruction.trim().is_empty() {
                return Err(ModelError::InvalidSchema(format!(
                    "resolution rule for {:?} has no instruction",
                    r.attribute
                )));
            }
        }
        Ok(())
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn key_attribute(&self) -> &AttributeSpec {
        &self.attributes[self.key_attribute_index]
    }

    /// Column indices that participate in any cross-field constraint or
    /// resolution rule. These cells anchor conflict decidability, so the
    /// missing-value injector leaves them alone.
    pub fn constrained_attributes(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for c in &self.cross_constraints {
            out.extend(self.attribute_index(&c.left));
            out.extend(self.attribute_index(&c.right));
        }
        for r in &self.resolution_rules {
            out.extend(self.attribute_index(&r.attribute));
        }
        out
    }

    /// Human-readable schema block for prompts.
    ///
    /// Cross-field constraints are included only for synthesis-side agents;
    /// extraction prompts must not reveal them, so callers pass `false`
    /// there. Resolution rules are always included: extractors are expected
    /// to apply them when the document carries conflicting values.
    pub fn specification_text(&self, include_cross_constraints: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Entity type: {}. Each row describes one {}.\n",
            self.entity_type, self.entity_type
        ));
        out.push_str("Attributes:\n");
        for (j, attr) in self.attributes.iter().enumerate() {
            let mut meta = vec![attr.data_type.to_string()];
            if j == self.key_attribute_index {
                meta.push("key".into());
            }
            if let Some(u) = &attr.unit {
                meta.push(format!("unit {u}"));
            }
            if let Some(f) = &attr.format {
                meta.push(format!("format {f}"));
            }
            out.push_str(&format!("- {} ({}): {}", attr.name, meta.join(", "), attr.description));
            if !attr.examples.is_empty() {
                out.push_str(&format!(" [examples: {}]", attr.examples.join(", ")));
            }
            out.push('\n');
        }
        if !self.resolution_rules.is_empty() {
            out.push_str("Conflict resolution rules:\n");
            for r in &self.resolution_rules {
                out.push_str(&format!("- {} [{}]: {}\n", r.attribute, r.kind, r.instruction));
            }
        }
        if include_cross_constraints && !self.cross_constraints.is_empty() {
            out.push_str("Cross-field constraints (hold for every row):\n");
            for c in &self.cross_constraints {
                out.push_str(&format!("- {} {} {}", c.left, c.op, c.right));
                if let Some(d) = &c.description {
                    out.push_str(&format!(" ({d})"));
                }
                out.push('\n');
            }
        }
        out
    }
}
