use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::align::AlignmentResult;
use super::score::{compute_metrics, CellOutcome, Metrics, ScoreCounts};
use super::similarity::SimilarityKind;
use super::stats::CorpusStats;

/// Scored result for one case within a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub counts: ScoreCounts,
    pub metrics: Metrics,
    pub alignment: AlignmentResult,
    pub outcomes: Vec<CellOutcome>,
}

/// Evaluation of one model over one or more cases. Raw counts ride along
/// with the derived rates so reports can be re-aggregated losslessly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub tau: f64,
    pub similarity: SimilarityKind,
    pub counts: ScoreCounts,
    pub metrics: Metrics,
    pub cases: Vec<CaseReport>,
}

impl EvalReport {
    pub fn from_cases(
        model: impl Into<String>,
        tau: f64,
        similarity: SimilarityKind,
        cases: Vec<CaseReport>,
    ) -> EvalReport {
        let mut counts = ScoreCounts::default();
        for case in &cases {
            counts.merge(&case.counts);
        }
        let metrics = compute_metrics(&counts);
        EvalReport { model: model.into(), tau, similarity, counts, metrics, cases }
    }
}

/// Aggregated view of one model across every report that mentions it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub cases: usize,
    pub counts: ScoreCounts,
    pub metrics: Metrics,
}

/// Cross-model summary, the shape the `report` subcommand emits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub models: Vec<ModelSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusStats>,
}

/// Groups reports by model name and reduces them by summing raw counts;
/// rates are recomputed from the merged counts, never averaged.
pub fn summarize(reports: &[EvalReport], corpus: Option<CorpusStats>) -> Summary {
    let mut by_model: BTreeMap<String, (usize, ScoreCounts)> = BTreeMap::new();
    for report in reports {
        let entry = by_model.entry(report.model.clone()).or_default();
        entry.0 += report.cases.len();
        entry.1.merge(&report.counts);
    }
    let models = by_model
        .into_iter()
        .map(|(model, (cases, counts))| {
            let metrics = compute_metrics(&counts);
            ModelSummary { model, cases, counts, metrics }
        })
        .collect();
    Summary { models, corpus }
}

fn fmt_rate(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "-".to_string(),
    }
}

/// Renders the summary as markdown tables: overall rates per model, then
/// per-category and per-sub-capability solve rates, then corpus shape.
pub fn render_summary_markdown(summary: &Summary) -> String {
    let mut out = String::from("# Evaluation summary\n\n");
    out.push_str("| model | cases | P | R | F1 | R_direct | R_indirect | drop % |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- | --- | --- |\n");
    for m in &summary.models {
        out.push_str(&format!(
            "| {} | {} | {:.2} | {:.2} | {:.2} | {} | {} | {} |\n",
            m.model,
            m.cases,
            m.metrics.precision,
            m.metrics.recall,
            m.metrics.f1,
            fmt_rate(m.metrics.recall_direct),
            fmt_rate(m.metrics.recall_indirect),
            fmt_rate(m.metrics.delta_pct),
        ));
    }

    let categories: Vec<String> = collect_keys(summary, |m| &m.metrics.cssr);
    if !categories.is_empty() {
        out.push_str("\n## Category solve rate\n\n");
        out.push_str(&header_row("model", &categories));
        for m in &summary.models {
            out.push_str(&value_row(&m.model, &categories, &m.metrics.cssr));
        }
    }

    let subs: Vec<String> = collect_keys(summary, |m| &m.metrics.scssr);
    if !subs.is_empty() {
        out.push_str("\n## Sub-capability solve rate\n\n");
        out.push_str(&header_row("model", &subs));
        for m in &summary.models {
            out.push_str(&value_row(&m.model, &subs, &m.metrics.scssr));
        }
    }

    if let Some(corpus) = &summary.corpus {
        out.push_str("\n## Corpus\n\n");
        out.push_str("| metric | min | max | avg |\n| --- | --- | --- | --- |\n");
        for (name, v) in [
            ("rows per table", corpus.rows),
            ("columns per table", corpus.cols),
            ("document tokens", corpus.doc_tokens),
        ] {
            out.push_str(&format!("| {name} | {} | {} | {:.2} |\n", v.min, v.max, v.avg));
        }
        out.push_str(&format!(
            "\n{} cases, {} labeled cells.\n",
            corpus.cases, corpus.total_cells
        ));
        if !corpus.category_cells.is_empty() {
            out.push_str("\n| category | cells |\n| --- | --- |\n");
            for (k, v) in &corpus.category_cells {
                out.push_str(&format!("| {k} | {v} |\n"));
            }
        }
        if !corpus.sub_capability_cells.is_empty() {
            out.push_str("\n| sub-capability | cells |\n| --- | --- |\n");
            for (k, v) in &corpus.sub_capability_cells {
                out.push_str(&format!("| {k} | {v} |\n"));
            }
        }
    }
    out
}

fn collect_keys<'a>(
    summary: &'a Summary,
    pick: impl Fn(&'a ModelSummary) -> &'a BTreeMap<String, f64>,
) -> Vec<String> {
    let mut keys: Vec<String> = summary
        .models
        .iter()
        .flat_map(|m| pick(m).keys().cloned())
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

fn header_row(first: &str, keys: &[String]) -> String {
    let mut out = format!("| {first} |");
    for k in keys {
        out.push_str(&format!(" {k} |"));
    }
    out.push('\n');
    out.push_str("| --- |");
    for _ in keys {
        out.push_str(" --- |");
    }
    out.push('\n');
    out
}

fn value_row(model: &str, keys: &[String], values: &BTreeMap<String, f64>) -> String {
    let mut out = format!("| {model} |");
    for k in keys {
        out.push_str(&format!(" {} |", fmt_rate(values.get(k).copied())));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::score::Bucket;

    fn counts(tp: u64, gt: u64, pred: u64) -> ScoreCounts {
        let mut c = ScoreCounts {
            tp,
            gt_cells: gt,
            pred_cells: pred,
            tp_direct: tp,
            gt_direct: gt,
            ..ScoreCounts::default()
        };
        c.by_category.insert("EMPTY".into(), Bucket { tp, total: gt });
        c
    }

    fn report(model: &str, tp: u64, gt: u64, pred: u64) -> EvalReport {
        let c = counts(tp, gt, pred);
        let case = CaseReport {
            case_id: "case-1".into(),
            metrics: compute_metrics(&c),
            counts: c,
            alignment: AlignmentResult {
                pairs: vec![],
                unmatched_gt: vec![],
                unmatched_pred: vec![],
                total_weight: 0.0,
            },
            outcomes: vec![],
        };
        EvalReport::from_cases(model, 0.85, SimilarityKind::NormalizedEdit, vec![case])
    }

    #[test]
    fn summarize_sums_counts_before_deriving_rates() {
        // two reports for one model: 3/4 and 1/4 -> merged 4/8 = 50%,
        // not the 62.5% a rate average would give
        let reports = vec![report("m", 3, 4, 4), report("m", 1, 4, 4)];
        let summary = summarize(&reports, None);
        assert_eq!(summary.models.len(), 1);
        let m = &summary.models[0];
        assert_eq!(m.cases, 2);
        assert_eq!(m.counts.tp, 4);
        assert_eq!(m.metrics.recall, 50.0);
    }

    #[test]
    fn summarize_groups_by_model_sorted() {
        let reports = vec![report("zeta", 1, 2, 2), report("alpha", 1, 2, 2)];
        let summary = summarize(&reports, None);
        let names: Vec<&str> = summary.models.iter().map(|m| m.model.as_str()).collect();
        assert_eq!(names, vec!["alpha", "zeta"]);
    }

    #[test]
    fn markdown_contains_per_model_rows_and_bucket_tables() {
        let summary = summarize(&[report("m1", 3, 4, 4)], None);
        let md = render_summary_markdown(&summary);
        assert!(md.contains("| m1 | 1 | 75.00 | 75.00 | 75.00 |"));
        assert!(md.contains("## Category solve rate"));
        assert!(md.contains("| EMPTY |"));
    }

    #[test]
    fn report_json_round_trips() {
        let r = report("m", 3, 4, 4);
        let json = serde_json::to_string_pretty(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.model, "m");
        assert_eq!(back.counts.tp, 3);
        assert_eq!(back.metrics, r.metrics);
    }
}
