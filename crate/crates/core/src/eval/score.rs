use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::align::{align_rows, AlignmentResult};
use super::similarity::SimilarityKind;
use super::EvalError;
use crate::model::{normalize_cell, CapabilityLabel, CapabilityMatrix, Schema, Table, NULL_TOKEN};

/// Solved/total tally for one capability bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub tp: u64,
    pub total: u64,
}

/// Raw cell-level counts. Everything here is an exact integer, so counts
/// from different cases (or different report files) merge associatively;
/// rates are derived only at presentation time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCounts {
    pub tp: u64,
    pub gt_cells: u64,
    pub pred_cells: u64,
    pub tp_direct: u64,
    pub gt_direct: u64,
    pub tp_indirect: u64,
    pub gt_indirect: u64,
    /// Keyed by category code; a bucket exists only when its total is
    /// non-zero.
    pub by_category: BTreeMap<String, Bucket>,
    /// Keyed by sub-capability id.
    pub by_sub: BTreeMap<String, Bucket>,
}

impl ScoreCounts {
    pub fn merge(&mut self, other: &ScoreCounts) {
        self.tp += other.tp;
        self.gt_cells += other.gt_cells;
        self.pred_cells += other.pred_cells;
        self.tp_direct += other.tp_direct;
        self.gt_direct += other.gt_direct;
        self.tp_indirect += other.tp_indirect;
        self.gt_indirect += other.gt_indirect;
        for (k, b) in &other.by_category {
            let e = self.by_category.entry(k.clone()).or_default();
            e.tp += b.tp;
            e.total += b.total;
        }
        for (k, b) in &other.by_sub {
            let e = self.by_sub.entry(k.clone()).or_default();
            e.tp += b.tp;
            e.total += b.total;
        }
    }
}

/// Per-cell verdict, one for every ground-truth cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    pub gt_row: usize,
    pub col: usize,
    /// Predicted row this gt row aligned to, if any.
    pub pred_row: Option<usize>,
    pub label: CapabilityLabel,
    /// Normalized ground-truth value (missing cells normalize to the null
    /// token).
    pub gt_value: String,
    /// Normalized predicted value; absent when the row is unmatched.
    pub pred_value: Option<String>,
    pub matched: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseScore {
    pub alignment: AlignmentResult,
    pub outcomes: Vec<CellOutcome>,
    pub counts: ScoreCounts,
}

/// Scores one prediction against its ground truth.
///
/// Rows are aligned by key similarity, then every ground-truth cell is
/// compared for exact equality after normalization; a missing gt value
/// matches only a missing (or null-token) prediction. Cells of unmatched
/// gt rows count as misses, cells of unmatched predicted rows inflate only
/// the precision denominator.
pub fn score_cells(
    schema: &Schema,
    gt: &Table,
    matrix: &CapabilityMatrix,
    pred_rows: &[Vec<Option<String>>],
    kind: SimilarityKind,
    tau: f64,
) -> Result<CaseScore, EvalError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(EvalError::InvalidTau(tau));
    }
    gt.validate_against(schema)?;
    matrix.check_shape(gt.n_rows(), gt.n_cols())?;
    let n_cols = gt.n_cols();
    for (idx, row) in pred_rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(EvalError::PredictionArity { row: idx, got: row.len(), want: n_cols });
        }
    }

    let key_col = schema.key_attribute_index;
    let gt_keys: Vec<String> = (0..gt.n_rows())
        .map(|i| gt.cell(i, key_col).expect("validated keys are present").to_string())
        .collect();
    let pred_keys: Vec<String> = pred_rows
        .iter()
        .map(|r| r[key_col].clone().unwrap_or_default())
        .collect();
    let alignment = align_rows(&gt_keys, &pred_keys, kind, tau);
    let mut pred_of_gt: BTreeMap<usize, usize> = BTreeMap::new();
    for &(i, p) in &alignment.pairs {
        pred_of_gt.insert(i, p);
    }

    let mut counts = ScoreCounts {
        gt_cells: (gt.n_rows() * n_cols) as u64,
        pred_cells: (pred_rows.len() * n_cols) as u64,
        ..ScoreCounts::default()
    };
    let mut outcomes = Vec::with_capacity(gt.n_rows() * n_cols);
    for i in 0..gt.n_rows() {
        let pred_row = pred_of_gt.get(&i).copied();
        for j in 0..n_cols {
            let label = *matrix.get(i, j);
            let gt_value = gt
                .cell(i, j)
                .map(normalize_cell)
                .unwrap_or_else(|| NULL_TOKEN.to_string());
            let pred_value = pred_row.map(|p| {
                pred_rows[p][j]
                    .as_deref()
                    .map(normalize_cell)
                    .unwrap_or_else(|| NULL_TOKEN.to_string())
            });
            let matched = pred_value.as_deref() == Some(gt_value.as_str());
            let hit = u64::from(matched);
            counts.tp += hit;
            if label.is_direct() {
                counts.gt_direct += 1;
                counts.tp_direct += hit;
            } else {
                counts.gt_indirect += 1;
                counts.tp_indirect += hit;
            }
            let cat = counts.by_category.entry(label.category().code().to_string()).or_default();
            cat.total += 1;
            cat.tp += hit;
            if let Some(sub) = label.sub() {
                let b = counts.by_sub.entry(sub.id().to_string()).or_default();
                b.total += 1;
                b.tp += hit;
            }
            outcomes.push(CellOutcome { gt_row: i, col: j, pred_row, label, gt_value, pred_value, matched });
        }
    }
    Ok(CaseScore { alignment, outcomes, counts })
}

/// Half-up rounding to two decimals, the precision all reported rates use.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Percentage `100 * numer / denom` rounded to two decimals; `None` when
/// the denominator is zero (the bucket does not apply).
pub fn pct(numer: u64, denom: u64) -> Option<f64> {
    if denom == 0 {
        None
    } else {
        Some(round2(100.0 * numer as f64 / denom as f64))
    }
}

/// Harmonic mean of two already-rounded percentages, rounded again. Zero
/// when both inputs are zero.
pub fn f1_percent(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        return 0.0;
    }
    round2(2.0 * precision * recall / (precision + recall))
}

/// Relative drop from direct to indirect recall, as a percentage of direct
/// recall. `None` when direct recall is zero.
pub fn delta_percent(recall_direct: f64, recall_indirect: f64) -> Option<f64> {
    if recall_direct == 0.0 {
        return None;
    }
    Some(round2((recall_direct - recall_indirect) / recall_direct * 100.0))
}

/// Presentation-level rates derived from raw counts. All values are
/// percentages rounded to two decimals; derived quantities (F1, the
/// direct-to-indirect drop) are computed from the rounded inputs so the
/// printed numbers stay mutually consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_direct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_indirect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_pct: Option<f64>,
    /// Category solve rate, by category code.
    pub cssr: BTreeMap<String, f64>,
    /// Sub-capability solve rate, by sub-capability id.
    pub scssr: BTreeMap<String, f64>,
}

pub fn compute_metrics(counts: &ScoreCounts) -> Metrics {
    let precision = pct(counts.tp, counts.pred_cells).unwrap_or(0.0);
    let recall = pct(counts.tp, counts.gt_cells).unwrap_or(0.0);
    let f1 = f1_percent(precision, recall);
    let recall_direct = pct(counts.tp_direct, counts.gt_direct);
    let recall_indirect = pct(counts.tp_indirect, counts.gt_indirect);
    let delta_pct = match (recall_direct, recall_indirect) {
        (Some(d), Some(i)) => delta_percent(d, i),
        _ => None,
    };
    let cssr = counts
        .by_category
        .iter()
        .filter_map(|(k, b)| pct(b.tp, b.total).map(|v| (k.clone(), v)))
        .collect();
    let scssr = counts
        .by_sub
        .iter()
        .filter_map(|(k, b)| pct(b.tp, b.total).map(|v| (k.clone(), v)))
        .collect();
    Metrics { precision, recall, f1, recall_direct, recall_indirect, delta_pct, cssr, scssr }
}
