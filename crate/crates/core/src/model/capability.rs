use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Coarse capability category a cell can demand from an extractor.
///
/// `Empty` marks cells whose value appears verbatim in the document and is
/// copied directly; every other category marks an indirect cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "TA")]
    TransformAlignment,
    #[serde(rename = "RI")]
    ReasoningInference,
    #[serde(rename = "DR")]
    DistractionResistance,
    #[serde(rename = "EF")]
    EmptyFaithfulness,
    #[serde(rename = "CR")]
    ConflictResolution,
    #[serde(rename = "EMPTY")]
    Empty,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::TransformAlignment,
        Category::ReasoningInference,
        Category::DistractionResistance,
        Category::EmptyFaithfulness,
        Category::ConflictResolution,
        Category::Empty,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Category::TransformAlignment => "TA",
            Category::ReasoningInference => "RI",
            Category::DistractionResistance => "DR",
            Category::EmptyFaithfulness => "EF",
            Category::ConflictResolution => "CR",
            Category::Empty => "EMPTY",
        }
    }

    pub fn from_code(code: &str) -> Option<Category> {
        let code = code.trim();
        Category::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(code))
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::TransformAlignment => "transformation alignment",
            Category::ReasoningInference => "reasoning inference",
            Category::DistractionResistance => "distraction resistance",
            Category::EmptyFaithfulness => "empty faithfulness",
            Category::ConflictResolution => "conflict resolution",
            Category::Empty => "direct extraction",
        }
    }

    /// One-line behavioural definition used in annotator prompts.
    pub fn definition(self) -> &'static str {
        match self {
            Category::TransformAlignment => {
                "the document states the value in a different surface form; recovering the cell requires a format, unit, or wording conversion"
            }
            Category::ReasoningInference => {
                "the value never appears literally; it must be inferred by combining facts through arithmetic, logic, temporal relations, or multi-step chains"
            }
            Category::DistractionResistance => {
                "the document contains similar but wrong candidates nearby; the extractor must ignore near-miss attributes or values"
            }
            Category::EmptyFaithfulness => {
                "the document gives no support for the cell; the correct output is the missing-value token rather than a guess"
            }
            Category::ConflictResolution => {
                "the document states several conflicting candidates; schema rules or constraints decide which one is correct"
            }
            Category::Empty => "the value appears verbatim in the document and can be copied directly",
        }
    }

    pub fn sub_capabilities(self) -> &'static [SubCapability] {
        match self {
            Category::TransformAlignment => &[
                SubCapability::FormatTransformation,
                SubCapability::UnitTransformation,
                SubCapability::SemanticMapping,
            ],
            Category::ReasoningInference => &[
                SubCapability::ArithmeticReasoning,
                SubCapability::LogicalReasoning,
                SubCapability::TemporalReasoning,
                SubCapability::MultihopReasoning,
            ],
            Category::DistractionResistance => &[
                SubCapability::AttributeDistraction,
                SubCapability::ValueDistraction,
            ],
            Category::EmptyFaithfulness => &[SubCapability::MissingValueFaithfulness],
            Category::ConflictResolution => &[
                SubCapability::RuleBasedResolution,
                SubCapability::ConstraintBasedResolution,
                SubCapability::SourceAwareResolution,
            ],
            Category::Empty => &[],
        }
    }

    /// Definition block listing every category, for the annotator prompt.
    pub fn definitions_text() -> String {
        let mut out = String::new();
        for c in Category::ALL {
            out.push_str(&format!("- {} ({}): {}\n", c.code(), c.display_name(), c.definition()));
        }
        out
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Fine-grained capability a non-direct cell tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubCapability {
    FormatTransformation,
    UnitTransformation,
    SemanticMapping,
    ArithmeticReasoning,
    LogicalReasoning,
    TemporalReasoning,
    MultihopReasoning,
    AttributeDistraction,
    ValueDistraction,
    MissingValueFaithfulness,
    RuleBasedResolution,
    ConstraintBasedResolution,
    SourceAwareResolution,
}

impl SubCapability {
    pub const ALL: [SubCapability; 13] = [
        SubCapability::FormatTransformation,
        SubCapability::UnitTransformation,
        SubCapability::SemanticMapping,
        SubCapability::ArithmeticReasoning,
        SubCapability::LogicalReasoning,
        SubCapability::TemporalReasoning,
        SubCapability::MultihopReasoning,
        SubCapability::AttributeDistraction,
        SubCapability::ValueDistraction,
        SubCapability::MissingValueFaithfulness,
        SubCapability::RuleBasedResolution,
        SubCapability::ConstraintBasedResolution,
        SubCapability::SourceAwareResolution,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SubCapability::FormatTransformation => "format_transformation",
            SubCapability::UnitTransformation => "unit_transformation",
            SubCapability::SemanticMapping => "semantic_mapping",
            SubCapability::ArithmeticReasoning => "arithmetic_reasoning",
            SubCapability::LogicalReasoning => "logical_reasoning",
            SubCapability::TemporalReasoning => "temporal_reasoning",
            SubCapability::MultihopReasoning => "multihop_reasoning",
            SubCapability::AttributeDistraction => "attribute_distraction",
            SubCapability::ValueDistraction => "value_distraction",
            SubCapability::MissingValueFaithfulness => "missing_value_faithfulness",
            SubCapability::RuleBasedResolution => "rule_based_resolution",
            SubCapability::ConstraintBasedResolution => "constraint_based_resolution",
            SubCapability::SourceAwareResolution => "source_aware_resolution",
        }
    }

    pub fn from_id(id: &str) -> Option<SubCapability> {
        let id = id.trim();
        SubCapability::ALL
            .into_iter()
            .find(|s| s.id().eq_ignore_ascii_case(id))
    }

    pub fn category(self) -> Category {
        match self {
            SubCapability::FormatTransformation
            | SubCapability::UnitTransformation
            | SubCapability::SemanticMapping => Category::TransformAlignment,
            SubCapability::ArithmeticReasoning
            | SubCapability::LogicalReasoning
            | SubCapability::TemporalReasoning
            | SubCapability::MultihopReasoning => Category::ReasoningInference,
            SubCapability::AttributeDistraction | SubCapability::ValueDistraction => {
                Category::DistractionResistance
            }
            SubCapability::MissingValueFaithfulness => Category::EmptyFaithfulness,
            SubCapability::RuleBasedResolution
            | SubCapability::ConstraintBasedResolution
            | SubCapability::SourceAwareResolution => Category::ConflictResolution,
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            SubCapability::FormatTransformation => {
                "same value, different formatting: date layout, casing, digit grouping, or spelling out"
            }
            SubCapability::UnitTransformation => {
                "the value is expressed in another unit or scale and must be converted back"
            }
            SubCapability::SemanticMapping => {
                "the value is described by a synonym or paraphrase that must be mapped onto the schema vocabulary"
            }
            SubCapability::ArithmeticReasoning => {
                "the value is an exact calculation over numbers stated in the text, such as a sum or difference"
            }
            SubCapability::LogicalReasoning => {
                "the value follows from logical conditions stated in the text"
            }
            SubCapability::TemporalReasoning => {
                "the value must be derived from temporal relations such as durations, orderings, or relative dates"
            }
            SubCapability::MultihopReasoning => {
                "the value requires chaining several separate statements spread across the text"
            }
            SubCapability::AttributeDistraction => {
                "the text surrounds the fact with similar but wrong attributes of the same entity"
            }
            SubCapability::ValueDistraction => {
                "the text mentions similar values attached to other entities or contexts"
            }
            SubCapability::MissingValueFaithfulness => {
                "the document deliberately withholds the value; the correct answer is the missing-value token"
            }
            SubCapability::RuleBasedResolution => {
                "conflicting candidates are resolved by an explicit precedence rule in the schema"
            }
            SubCapability::ConstraintBasedResolution => {
                "conflicting candidates are resolved by cross-field constraints that only one candidate satisfies"
            }
            SubCapability::SourceAwareResolution => {
                "conflicting candidates are resolved by the stated reliability ordering of their sources"
            }
        }
    }

    /// Definition block for the refiner prompt, limited to one category.
    pub fn definitions_text_for(category: Category) -> String {
        let mut out = String::new();
        for s in category.sub_capabilities() {
            out.push_str(&format!("- {}: {}\n", s.id(), s.definition()));
        }
        out
    }
}

impl fmt::Display for SubCapability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Validated (category, sub-capability) pair for one cell.
///
/// A sub-capability is present exactly when the category is not `EMPTY`,
/// and it always belongs to that category; both invariants are enforced at
/// construction and on deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelRepr", into = "LabelRepr")]
pub struct CapabilityLabel {
    category: Category,
    sub: Option<SubCapability>,
}

#[derive(Serialize, Deserialize)]
struct LabelRepr {
    category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sub: Option<SubCapability>,
}

impl TryFrom<LabelRepr> for CapabilityLabel {
    type Error = ModelError;
    fn try_from(repr: LabelRepr) -> Result<Self, ModelError> {
        CapabilityLabel::new(repr.category, repr.sub)
    }
}

impl From<CapabilityLabel> for LabelRepr {
    fn from(l: CapabilityLabel) -> LabelRepr {
        LabelRepr { category: l.category, sub: l.sub }
    }
}

impl CapabilityLabel {
    pub fn new(category: Category, sub: Option<SubCapability>) -> Result<Self, ModelError> {
        match (category, sub) {
            (Category::Empty, None) => Ok(CapabilityLabel { category, sub }),
            (Category::Empty, Some(s)) => Err(ModelError::IllegalLabel(format!(
                "EMPTY label cannot carry sub-capability {s}"
            ))),
            (c, None) => Err(ModelError::IllegalLabel(format!(
                "category {c} requires a sub-capability"
            ))),
            (c, Some(s)) if s.category() != c => Err(ModelError::IllegalLabel(format!(
                "sub-capability {s} belongs to {}, not {c}",
                s.category()
            ))),
            (c, Some(s)) => Ok(CapabilityLabel { category: c, sub: Some(s) }),
        }
    }

    pub fn empty() -> Self {
        CapabilityLabel { category: Category::Empty, sub: None }
    }

    pub fn from_sub(sub: SubCapability) -> Self {
        CapabilityLabel { category: sub.category(), sub: Some(sub) }
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn sub(&self) -> Option<SubCapability> {
        self.sub
    }

    /// Direct cells are copied verbatim from the document; everything else
    /// exercises an indirect capability.
    pub fn is_direct(&self) -> bool {
        self.category == Category::Empty
    }
}

impl fmt::Display for CapabilityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sub {
            Some(s) => write!(f, "{}/{}", self.category, s),
            None => write!(f, "{}", self.category),
        }
    }
}

/// Per-cell capability labels for a whole table, same shape as the table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct CapabilityMatrix {
    labels: Vec<Vec<CapabilityLabel>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    labels: Vec<Vec<CapabilityLabel>>,
}

impl TryFrom<MatrixRepr> for CapabilityMatrix {
    type Error = ModelError;
    fn try_from(repr: MatrixRepr) -> Result<Self, ModelError> {
        CapabilityMatrix::new(repr.labels)
    }
}

impl From<CapabilityMatrix> for MatrixRepr {
    fn from(m: CapabilityMatrix) -> MatrixRepr {
        MatrixRepr { labels: m.labels }
    }
}

impl CapabilityMatrix {
    pub fn new(labels: Vec<Vec<CapabilityLabel>>) -> Result<Self, ModelError> {
        if labels.is_empty() || labels[0].is_empty() {
            return Err(ModelError::InvalidMatrix("matrix has no cells".into()));
        }
        let width = labels[0].len();
        if labels.iter().any(|row| row.len() != width) {
            return Err(ModelError::InvalidMatrix("rows differ in length".into()));
        }
        Ok(CapabilityMatrix { labels })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.labels[0].len()
    }

    pub fn get(&self, row: usize, col: usize) -> &CapabilityLabel {
        &self.labels[row][col]
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, &CapabilityLabel)> {
        self.labels
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, l)| (i, j, l)))
    }

    /// Fails unless the matrix has exactly the table's shape.
    pub fn check_shape(&self, n_rows: usize, n_cols: usize) -> Result<(), ModelError> {
        if self.n_rows() != n_rows || self.n_cols() != n_cols {
            return Err(ModelError::InvalidMatrix(format!(
                "matrix is {}x{}, table is {}x{}",
                self.n_rows(),
                self.n_cols(),
                n_rows,
                n_cols
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_capabilities_map_back_to_their_category() {
        for s in SubCapability::ALL {
            assert!(s.category().sub_capabilities().contains(&s));
        }
    }

    #[test]
    fn empty_label_rejects_sub_capability() {
        assert!(CapabilityLabel::new(Category::Empty, Some(SubCapability::SemanticMapping)).is_err());
        assert!(CapabilityLabel::new(Category::Empty, None).is_ok());
    }

    #[test]
    fn non_empty_label_requires_matching_sub() {
        assert!(CapabilityLabel::new(Category::ReasoningInference, None).is_err());
        assert!(CapabilityLabel::new(
            Category::ReasoningInference,
            Some(SubCapability::ValueDistraction)
        )
        .is_err());
        let ok = CapabilityLabel::new(
            Category::ReasoningInference,
            Some(SubCapability::TemporalReasoning),
        )
        .unwrap();
        assert!(!ok.is_direct());
    }

    #[test]
    fn serde_rejects_illegal_combination() {
        let bad = r#"{"category":"TA","sub":"arithmetic_reasoning"}"#;
        assert!(serde_json::from_str::<CapabilityLabel>(bad).is_err());
        let good = r#"{"category":"TA","sub":"unit_transformation"}"#;
        let l: CapabilityLabel = serde_json::from_str(good).unwrap();
        assert_eq!(l.sub(), Some(SubCapability::UnitTransformation));
    }

    #[test]
    fn serde_round_trip() {
        let l = CapabilityLabel::from_sub(SubCapability::ConstraintBasedResolution);
        let json = serde_json::to_string(&l).unwrap();
        let back: CapabilityLabel = serde_json::from_str(&json).unwrap();
        assert_eq!(l, back);
        let e = CapabilityLabel::empty();
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"category":"EMPTY"}"#);
    }

    #[test]
    fn codes_parse_case_insensitively() {
        assert_eq!(Category::from_code(" ta "), Some(Category::TransformAlignment));
        assert_eq!(Category::from_code("EMPTY"), Some(Category::Empty));
        assert_eq!(Category::from_code("xx"), None);
        assert_eq!(
            SubCapability::from_id("Unit_Transformation"),
            Some(SubCapability::UnitTransformation)
        );
    }

    #[test]
    fn matrix_must_be_rectangular() {
        let l = CapabilityLabel::empty();
        assert!(CapabilityMatrix::new(vec![vec![l; 2], vec![l; 3]]).is_err());
        let m = CapabilityMatrix::new(vec![vec![l; 2], vec![l; 2]]).unwrap();
        m.check_shape(2, 2).unwrap();
        assert!(m.check_shape(2, 3).is_err());
    }
}
