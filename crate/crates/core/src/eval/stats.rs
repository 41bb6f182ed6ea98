use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::score::round2;
use crate::model::CapabilityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxAvg {
    pub min: u64,
    pub max: u64,
    /// Mean rounded to two decimals.
    pub avg: f64,
}

fn min_max_avg(values: &[u64]) -> MinMaxAvg {
    let min = *values.iter().min().expect("caller guarantees non-empty");
    let max = *values.iter().max().expect("caller guarantees non-empty");
    let avg = round2(values.iter().sum::<u64>() as f64 / values.len() as f64);
    MinMaxAvg { min, max, avg }
}

/// One synthesized case as the statistics collector sees it.
pub struct CorpusCase<'a> {
    pub matrix: &'a CapabilityMatrix,
    pub doc_tokens: usize,
}

/// Shape and label distribution of a corpus of cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub cases: usize,
    pub rows: MinMaxAvg,
    pub cols: MinMaxAvg,
    pub doc_tokens: MinMaxAvg,
    pub total_cells: u64,
    /// Cells per category code, summed over all cases.
    pub category_cells: BTreeMap<String, u64>,
    /// Cells per sub-capability id.
    pub sub_capability_cells: BTreeMap<String, u64>,
}

/// Aggregates table shapes, document lengths, and capability distribution.
/// Returns `None` for an empty corpus.
pub fn corpus_stats(cases: &[CorpusCase]) -> Option<CorpusStats> {
    if cases.is_empty() {
        return None;
    }
    let rows: Vec<u64> = cases.iter().map(|c| c.matrix.n_rows() as u64).collect();
    let cols: Vec<u64> = cases.iter().map(|c| c.matrix.n_cols() as u64).collect();
    let tokens: Vec<u64> = cases.iter().map(|c| c.doc_tokens as u64).collect();
    let mut category_cells = BTreeMap::new();
    let mut sub_capability_cells = BTreeMap::new();
    let mut total_cells = 0u64;
    for case in cases {
        for (_, _, label) in case.matrix.iter_cells() {
            total_cells += 1;
            *category_cells.entry(label.category().code().to_string()).or_insert(0) += 1;
            if let Some(sub) = label.sub() {
                *sub_capability_cells.entry(sub.id().to_string()).or_insert(0) += 1;
            }
        }
    }
    Some(CorpusStats {
        cases: cases.len(),
        rows: min_max_avg(&rows),
        cols: min_max_avg(&cols),
        doc_tokens: min_max_avg(&tokens),
        total_cells,
        category_cells,
        sub_capability_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CapabilityLabel, SubCapability};

    #[test]
    fn two_case_corpus_hand_computed() {
        let e = CapabilityLabel::empty();
        let ar = CapabilityLabel::from_sub(SubCapability::ArithmeticReasoning);
        let m1 = CapabilityMatrix::new(vec![vec![e, ar], vec![e, e], vec![e, e]]).unwrap();
        let m2 = CapabilityMatrix::new(vec![
            vec![e, ar, ar, e],
            vec![e, e, e, e],
            vec![e, e, e, e],
            vec![e, e, e, e],
            vec![e, e, e, e],
        ])
        .unwrap();
        let stats = corpus_stats(&[
            CorpusCase { matrix: &m1, doc_tokens: 500 },
            CorpusCase { matrix: &m2, doc_tokens: 1200 },
        ])
        .unwrap();
        assert_eq!(stats.cases, 2);
        assert_eq!(stats.rows, MinMaxAvg { min: 3, max: 5, avg: 4.0 });
        assert_eq!(stats.cols, MinMaxAvg { min: 2, max: 4, avg: 3.0 });
        assert_eq!(stats.doc_tokens, MinMaxAvg { min: 500, max: 1200, avg: 850.0 });
        assert_eq!(stats.total_cells, 26);
        assert_eq!(stats.category_cells.get("EMPTY"), Some(&23));
        assert_eq!(stats.category_cells.get("RI"), Some(&3));
        assert_eq!(stats.sub_capability_cells.get("arithmetic_reasoning"), Some(&3));
    }

    #[test]
    fn empty_corpus_yields_none() {
        assert!(corpus_stats(&[]).is_none());
    }
}
