//! Randomized invariants over the data model and scoring pipeline. These
//! complement the acceptance gate: instead of pinning known answers they
//! assert structural laws that must hold for every input.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use doctable::eval::{score_cells, SimilarityKind};
use doctable::extraction::{parse_markdown_table, render_markdown_rows};
use doctable::gateway::extract_structured;
use doctable::model::{
    normalize_cell, AttributeSpec, CapabilityLabel, CapabilityMatrix, CompareOp, CrossConstraint,
    DataType, ResolutionKind, ResolutionRule, Schema, SubCapability, Table, NULL_TOKEN,
};

// --- normalization ----------------------------------------------------------

/// Strings biased toward the interesting branches: grouped numbers, missing
/// value spellings, punctuation, and plain words.
fn messy_string() -> impl Strategy<Value = String> {
    let fragment = prop_oneof![
        Just("Acme Corp.".to_string()),
        Just("3,480,000".to_string()),
        Just("N/A".to_string()),
        Just("-".to_string()),
        Just("2025-06-20".to_string()),
        Just("12.5%".to_string()),
        Just("  ".to_string()),
        "[a-zA-Z0-9,./$ -]{0,12}",
        "\\PC{0,12}",
    ];
    proptest::collection::vec(fragment, 0..4).prop_map(|parts| parts.join(" "))
}

proptest! {
    #[test]
    fn normalize_is_idempotent_and_canonical(s in messy_string()) {
        let once = normalize_cell(&s);
        prop_assert_eq!(normalize_cell(&once), once.clone());
        prop_assert!(!once.is_empty(), "normalization must never produce an empty string");
        prop_assert_eq!(once.trim(), once.as_str());
        prop_assert!(!once.contains("  "), "internal whitespace must collapse: {:?}", once);
        prop_assert!(
            !once.chars().any(|c| c.is_ascii_uppercase()),
            "output must be lowercase: {:?}",
            once
        );
    }

    #[test]
    fn normalize_any_unicode_is_idempotent(s in any::<String>()) {
        let once = normalize_cell(&s);
        prop_assert_eq!(normalize_cell(&once), once);
    }

    #[test]
    fn null_spellings_all_collapse(spelling in prop_oneof![
        Just(String::new()),
        Just("  ".to_string()),
        "[Nn][Uu][Ll][Ll]",
        "[Nn]/[Aa]",
        "[Nn][Oo][Nn][Ee]",
        "[Nn][Aa][Nn]",
        Just("-".to_string()),
    ]) {
        prop_assert_eq!(normalize_cell(&spelling), NULL_TOKEN);
    }
}

// --- markdown table round trip ----------------------------------------------

/// Cell values that survive a markdown row unchanged: no pipes or newlines,
/// no surrounding whitespace, not a null spelling.
fn clean_value() -> impl Strategy<Value = String> {
    "[a-z0-9]{1,8}( [a-z0-9]{1,8}){0,2}"
        .prop_filter("null literal reads back as a missing cell", |s| {
            !s.eq_ignore_ascii_case("null")
        })
}

fn table_rows() -> impl Strategy<Value = (Vec<String>, Vec<Vec<Option<String>>>)> {
    (1usize..=5).prop_flat_map(|cols| {
        // underscores keep data rows from ever spelling the header
        let header: Vec<String> = (0..cols).map(|j| format!("col_{j}")).collect();
        // the first cell is always present, mirroring the key column every
        // real prediction carries; an all-blank pipe row reads as decoration
        // and is deliberately dropped by the parser
        let cell = proptest::option::weighted(0.75, clean_value());
        let row = (clean_value(), proptest::collection::vec(cell, cols - 1)).prop_map(
            |(key, rest)| {
                let mut row = vec![Some(key)];
                row.extend(rest);
                row
            },
        );
        proptest::collection::vec(row, 0..=6).prop_map(move |rows| (header.clone(), rows))
    })
}

proptest! {
    #[test]
    fn markdown_rows_round_trip((header, rows) in table_rows()) {
        let text = render_markdown_rows(&header, &rows);
        let parsed = parse_markdown_table(&text, &header)
            .map_err(|e| TestCaseError::fail(format!("parse failed: {e}")))?;
        prop_assert_eq!(&parsed.rows, &rows);
        prop_assert!(parsed.repairs.is_empty(), "clean render needed repairs: {:?}", parsed.repairs);
    }
}

// --- structured reply extraction ---------------------------------------------

fn json_leaf() -> impl Strategy<Value = serde_json::Value> {
    prop_oneof![
        "[a-z0-9 ]{0,10}".prop_map(serde_json::Value::String),
        any::<i64>().prop_map(serde_json::Value::from),
        any::<bool>().prop_map(serde_json::Value::Bool),
        Just(serde_json::Value::Null),
    ]
}

fn json_object() -> impl Strategy<Value = serde_json::Value> {
    let value = prop_oneof![
        json_leaf(),
        proptest::collection::vec(json_leaf(), 0..3).prop_map(serde_json::Value::Array),
    ];
    proptest::collection::btree_map("[a-z]{1,6}", value, 1..5).prop_map(|m| {
        serde_json::Value::Object(m.into_iter().collect())
    })
}

proptest! {
    #[test]
    fn structured_reply_survives_wrapping(obj in json_object(), style in 0u8..4) {
        let body = serde_json::to_string_pretty(&obj).unwrap();
        let wrapped = match style {
            0 => body,
            1 => format!("```json\n{body}\n```"),
            2 => format!("The result follows.\n```json\n{body}\n```\nEnd of output."),
            _ => format!("Sure, here it is: {body} as requested."),
        };
        let got = extract_structured(&wrapped)
            .map_err(|e| TestCaseError::fail(format!("extraction failed: {e}")))?;
        prop_assert_eq!(got, obj);
    }
}

// --- serde round trips --------------------------------------------------------

fn arb_data_type() -> impl Strategy<Value = DataType> {
    prop_oneof![
        Just(DataType::Text),
        Just(DataType::Integer),
        Just(DataType::Decimal),
        Just(DataType::Date),
        Just(DataType::Boolean),
    ]
}

fn arb_compare_op() -> impl Strategy<Value = CompareOp> {
    prop_oneof![
        Just(CompareOp::Lt),
        Just(CompareOp::Le),
        Just(CompareOp::Eq),
        Just(CompareOp::Ge),
        Just(CompareOp::Gt),
    ]
}

fn arb_resolution_kind() -> impl Strategy<Value = ResolutionKind> {
    prop_oneof![
        Just(ResolutionKind::RuleBased),
        Just(ResolutionKind::ConstraintBased),
        Just(ResolutionKind::SourceAware),
    ]
}

fn arb_schema() -> impl Strategy<Value = Schema> {
    (2usize..=5).prop_flat_map(|cols| {
        let attrs: Vec<BoxedStrategy<AttributeSpec>> = (0..cols)
            .map(|j| {
                (
                    arb_data_type(),
                    proptest::option::of("[a-z]{1,6}"),
                    proptest::option::of("[a-z-]{1,8}"),
                    proptest::collection::vec("[a-z0-9 ]{1,10}", 0..=2),
                    "[a-z ]{1,20}",
                )
                    .prop_map(move |(data_type, unit, format, examples, description)| {
                        AttributeSpec {
                            name: format!("attr_{j}"),
                            description,
                            data_type,
                            unit,
                            format,
                            examples,
                        }
                    })
                    .boxed()
            })
            .collect();
        let constraint = proptest::option::of(
            (arb_compare_op(), proptest::option::of("[a-z ]{1,15}")).prop_map(
                move |(op, description)| CrossConstraint {
                    left: "attr_0".into(),
                    op,
                    right: format!("attr_{}", cols - 1),
                    description,
                },
            ),
        );
        let rule = proptest::option::of((arb_resolution_kind(), "[a-z][a-z ]{0,19}").prop_map(
            |(kind, instruction)| ResolutionRule { attribute: "attr_1".into(), kind, instruction },
        ));
        (attrs, 0..cols, "[a-z]{1,10}", constraint, rule).prop_map(
            |(attributes, key_attribute_index, entity_type, constraint, rule)| Schema {
                entity_type,
                attributes,
                key_attribute_index,
                cross_constraints: constraint.into_iter().collect(),
                resolution_rules: rule.into_iter().collect(),
            },
        )
    })
}

proptest! {
    #[test]
    fn schema_serde_round_trips(schema in arb_schema()) {
        prop_assert!(schema.validate().is_ok(), "generator must produce valid schemas");
        let json = serde_json::to_value(&schema).unwrap();
        let back: Schema = serde_json::from_value(json.clone())
            .map_err(|e| TestCaseError::fail(format!("deserialize failed: {e}")))?;
        prop_assert_eq!(serde_json::to_value(&back).unwrap(), json);
    }

    #[test]
    fn table_serde_round_trips(
        (_, rows) in table_rows().prop_filter("tables need a row", |(_, r)| !r.is_empty())
    ) {
        let table = Table::new(rows).unwrap();
        let text = serde_json::to_string(&table).unwrap();
        let back: Table = serde_json::from_str(&text)
            .map_err(|e| TestCaseError::fail(format!("deserialize failed: {e}")))?;
        prop_assert_eq!(back, table);
    }
}

// --- scoring is independent of prediction row order ---------------------------

const POOL: [&str; 6] = ["42", "3,480,000", "blue", "2024-05-01", "12.5", "seven"];

#[derive(Debug)]
struct PermCase {
    schema: Schema,
    gt: Table,
    matrix: CapabilityMatrix,
    pred: Vec<Vec<Option<String>>>,
    seed: u64,
}

/// One non-key ground-truth cell: missing roll, pool index, label choice,
/// and the prediction mutation roll.
type CellPlan = (u8, usize, bool, usize, u8);

fn text_schema(cols: usize) -> Schema {
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

fn arb_perm_case() -> impl Strategy<Value = PermCase> {
    (2usize..=4, 1usize..=5).prop_flat_map(|(cols, n)| {
        let row = ("[bcdfghjkmprstvwz]{3,6}", proptest::collection::vec(any::<CellPlan>(), cols - 1), any::<u8>());
        let extra = ("[bcdfghjkmprstvwz]{3,6}", proptest::collection::vec(0usize..POOL.len(), cols - 1));
        (
            proptest::collection::vec(row, n),
            proptest::collection::vec(extra, 0..=2),
            any::<u64>(),
        )
            .prop_map(move |(row_plans, extras, seed)| {
                let mut gt_rows = Vec::with_capacity(n);
                let mut labels = Vec::with_capacity(n);
                let mut pred = Vec::new();
                for (i, (word, cells, keep_roll)) in row_plans.into_iter().enumerate() {
                    // unique alphanumeric keys survive normalization unchanged,
                    // so at tau 1.0 the optimal matching is unique
                    let key = format!("k{i}{word}");
                    let mut gt_row = vec![Some(key.clone())];
                    let mut label_row = vec![CapabilityLabel::empty()];
                    let mut pred_row = vec![Some(key)];
                    for (none_roll, value_idx, label_empty, label_idx, pred_roll) in cells {
                        let gt_cell = if none_roll < 64 {
                            None
                        } else {
                            Some(POOL[value_idx % POOL.len()].to_string())
                        };
                        label_row.push(if label_empty {
                            CapabilityLabel::empty()
                        } else {
                            CapabilityLabel::from_sub(
                                SubCapability::ALL[label_idx % SubCapability::ALL.len()],
                            )
                        });
                        let pred_cell = if pred_roll < 178 {
                            gt_cell.clone()
                        } else if pred_roll < 216 {
                            None
                        } else {
                            Some(POOL[(value_idx + 1) % POOL.len()].to_string())
                        };
                        gt_row.push(gt_cell);
                        pred_row.push(pred_cell);
                    }
                    gt_rows.push(gt_row);
                    labels.push(label_row);
                    if keep_roll < 205 {
                        pred.push(pred_row);
                    }
                }
                for (j, (word, value_idxs)) in extras.into_iter().enumerate() {
                    let mut invented = vec![Some(format!("x{j}{word}"))];
                    invented.extend(
                        value_idxs.into_iter().map(|v| Some(POOL[v].to_string())),
                    );
                    pred.push(invented);
                }
                PermCase {
                    schema: text_schema(cols),
                    gt: Table::new(gt_rows).expect("generated table is rectangular"),
                    matrix: CapabilityMatrix::new(labels).expect("generated matrix is rectangular"),
                    pred,
                    seed,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scoring_ignores_prediction_row_order(case in arb_perm_case()) {
        let kind = SimilarityKind::NormalizedEdit;
        let base = score_cells(&case.schema, &case.gt, &case.matrix, &case.pred, kind, 1.0)
            .map_err(|e| TestCaseError::fail(format!("scoring failed: {e}")))?;

        let mut shuffled = case.pred.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let permuted = score_cells(&case.schema, &case.gt, &case.matrix, &shuffled, kind, 1.0)
            .map_err(|e| TestCaseError::fail(format!("scoring shuffled failed: {e}")))?;

        prop_assert_eq!(&permuted.counts, &base.counts);
        prop_assert_eq!(permuted.alignment.total_weight, base.alignment.total_weight);
        prop_assert_eq!(permuted.alignment.pairs.len(), base.alignment.pairs.len());
    }
}
