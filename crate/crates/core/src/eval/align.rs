use serde::{Deserialize, Serialize};

use super::similarity::{similarity, SimilarityKind};
use crate::model::normalize_cell;

/// Outcome of matching predicted rows onto ground-truth rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// (gt_row, pred_row) pairs, sorted by gt_row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
    /// Sum of admissible edge weights over `pairs`.
    pub total_weight: f64,
}

const WEIGHT_EPS: f64 = 1e-9;

/// Aligns predicted rows to ground-truth rows by key similarity.
///
/// Edge weight is the similarity of the normalized key values; an edge is
/// admissible only when its weight reaches `tau`. Among admissible edges
/// the matching maximizes total weight, and among equally heavy optima the
/// lexicographically smallest pair list (ordered by gt row, then pred row)
/// is chosen, which makes alignment deterministic even when duplicate keys
/// produce ties.
pub fn align_rows(
    gt_keys: &[String],
    pred_keys: &[String],
    kind: SimilarityKind,
    tau: f64,
) -> AlignmentResult {
    let n_gt = gt_keys.len();
    let n_pred = pred_keys.len();
    if n_gt == 0 || n_pred == 0 {
        return AlignmentResult {
            pairs: vec![],
            unmatched_gt: (0..n_gt).collect(),
            unmatched_pred: (0..n_pred).collect(),
            total_weight: 0.0,
        };
    }
    let gt_norm: Vec<String> = gt_keys.iter().map(|k| normalize_cell(k)).collect();
    let pred_norm: Vec<String> = pred_keys.iter().map(|k| normalize_cell(k)).collect();
    let mut weights = vec![vec![0.0f64; n_pred]; n_gt];
    let mut admissible = vec![vec![false; n_pred]; n_gt];
    for i in 0..n_gt {
        for j in 0..n_pred {
            let w = similarity(kind, &gt_norm[i], &pred_norm[j]);
            if w >= tau {
                weights[i][j] = w;
                admissible[i][j] = true;
            }
        }
    }

    let w_star = best_weight(&weights, &[]);
    // Greedy lexicographic fixing: walk cells in (gt, pred) order and keep a
    // pair whenever some optimum still contains everything fixed so far.
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    for i in 0..n_gt {
        for j in 0..n_pred {
            if !admissible[i][j] {
                continue;
            }
            if fixed.iter().any(|&(fi, fj)| fi == i || fj == j) {
                continue;
            }
            fixed.push((i, j));
            let w = best_weight(&weights, &fixed);
            if (w_star - w) > WEIGHT_EPS {
                fixed.pop();
            }
        }
    }

    let matched_gt: Vec<usize> = fixed.iter().map(|&(i, _)| i).collect();
    let matched_pred: Vec<usize> = fixed.iter().map(|&(_, j)| j).collect();
    let total_weight = fixed.iter().map(|&(i, j)| weights[i][j]).sum();
    AlignmentResult {
        pairs: fixed,
        unmatched_gt: (0..n_gt).filter(|i| !matched_gt.contains(i)).collect(),
        unmatched_pred: (0..n_pred).filter(|j| !matched_pred.contains(j)).collect(),
        total_weight,
    }
}

/// Maximum total weight of a matching that contains every `forced` pair.
/// Inadmissible cells hold weight zero, so leaving a row unmatched and
/// matching it through a zero edge are equivalent; forced pairs are summed
/// directly and the rest is solved on the remaining submatrix.
fn best_weight(weights: &[Vec<f64>], forced: &[(usize, usize)]) -> f64 {
    let n_gt = weights.len();
    let n_pred = weights[0].len();
    let forced_weight: f64 = forced.iter().map(|&(i, j)| weights[i][j]).sum();
    let rows: Vec<usize> = (0..n_gt).filter(|i| !forced.iter().any(|&(fi, _)| fi == *i)).collect();
    let cols: Vec<usize> = (0..n_pred).filter(|j| !forced.iter().any(|&(_, fj)| fj == *j)).collect();
    if rows.is_empty() || cols.is_empty() {
        return forced_weight;
    }
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| weights[i][j]).collect())
        .collect();
    forced_weight + max_weight_square(&sub)
}

/// Maximum-weight assignment on an arbitrary rectangular non-negative
/// matrix, solved as min-cost perfect assignment on a zero-padded square.
fn max_weight_square(weights: &[Vec<f64>]) -> f64 {
    let r = weights.len();
    let c = weights[0].len();
    let n = r.max(c);
    let mut w_max = 0.0f64;
    for row in weights {
        for &w in row {
            w_max = w_max.max(w);
        }
    }
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i < r && j < c { w_max - weights[i][j] } else { w_max })
                .collect()
        })
        .collect();
    let row_of_col = min_cost_assignment(&cost);
    let mut total = 0.0;
    for (j, &i) in row_of_col.iter().enumerate() {
        if i < r && j < c {
            total += weights[i][j];
        }
    }
    total
}

/// Hungarian algorithm with potentials, O(n^3). Input is a square cost
/// matrix; the result maps each column to its assigned row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based internals; index 0 is the sentinel column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_of_col = vec![0usize; n];
    for j in 1..=n {
        row_of_col[j - 1] = p[j] - 1;
    }
    row_of_col
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_keys_align_one_to_one() {
        let gt = keys(&["alpha corp", "beta llc", "gamma inc"]);
        let pred = keys(&["gamma inc", "alpha corp", "beta llc"]);
        let r = align_rows(&gt, &pred, SimilarityKind::NormalizedEdit, 0.85);
        assert_eq!(r.pairs, vec![(0, 1), (1, 2), (2, 0)]);
        assert!(r.unmatched_gt.is_empty());
        assert!(r.unmatched_pred.is_empty());
        assert!((r.total_weight - 3.0).abs() < 1e-12);
    }

    #[test]
    fn below_tau_edges_stay_unmatched() {
        let gt = keys(&["alpha corp"]);
        let pred = keys(&["completely different"]);
        let r = align_rows(&gt, &pred, SimilarityKind::NormalizedEdit, 0.85);
        assert!(r.pairs.is_empty());
        assert_eq!(r.unmatched_gt, vec![0]);
        assert_eq!(r.unmatched_pred, vec![0]);
    }

    #[test]
    fn near_duplicate_keys_resolve_to_best_total_weight() {
        // identity pairing (1.0 + 0.9375) beats the crossed one (0.6 + 0.5625)
        let gt = keys(&["acme corp", "acme corporation"]);
        let pred = keys(&["acme corp", "acme corporatio"]);
        let r = align_rows(&gt, &pred, SimilarityKind::NormalizedEdit, 0.5);
        assert_eq!(r.pairs, vec![(0, 0), (1, 1)]);
        assert!((r.total_weight - 1.9375).abs() < 1e-12);
    }

    #[test]
    fn global_optimum_beats_greedy_row_choice() {
        // picking the heaviest edge (0,0) first would strand row 1
        let weights = vec![vec![0.9, 0.8], vec![0.8, 0.0]];
        assert!((best_weight(&weights, &[]) - 1.6).abs() < 1e-9);
        assert!((best_weight(&weights, &[(0, 0)]) - 0.9).abs() < 1e-9);
    }

    #[test]
    fn duplicate_keys_tie_break_lexicographically() {
        let gt = keys(&["acme", "acme"]);
        let pred = keys(&["acme", "acme"]);
        let r = align_rows(&gt, &pred, SimilarityKind::NormalizedEdit, 0.85);
        // all four pairings are weight 1; the canonical optimum is identity
        assert_eq!(r.pairs, vec![(0, 0), (1, 1)]);
        assert!((r.total_weight - 2.0).abs() < 1e-12);
    }

    #[test]
    fn surplus_rows_on_either_side_stay_unmatched() {
        let gt = keys(&["alpha corp", "beta llc"]);
        let pred = keys(&["beta llc"]);
        let r = align_rows(&gt, &pred, SimilarityKind::NormalizedEdit, 0.85);
        assert_eq!(r.pairs, vec![(1, 0)]);
        assert_eq!(r.unmatched_gt, vec![0]);

        let r = align_rows(&pred, &gt, SimilarityKind::NormalizedEdit, 0.85);
        assert_eq!(r.pairs, vec![(0, 1)]);
        assert_eq!(r.unmatched_pred, vec![0]);
    }

    #[test]
    fn keys_are_normalized_before_comparison() {
        let gt = keys(&["Acme Corp."]);
        let pred = keys(&["  acme   corp "]);
        let r = align_rows(&gt, &pred, SimilarityKind::NormalizedEdit, 0.99);
        assert_eq!(r.pairs, vec![(0, 0)]);
    }

    #[test]
    fn empty_prediction_leaves_all_gt_unmatched() {
        let gt = keys(&["a", "b"]);
        let r = align_rows(&gt, &[], SimilarityKind::NormalizedEdit, 0.85);
        assert!(r.pairs.is_empty());
        assert_eq!(r.unmatched_gt, vec![0, 1]);
    }
}
