use serde::{Deserialize, Serialize};

/// Key-value similarity used for row alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    /// `1 - edit_distance / max_len` over characters.
    NormalizedEdit,
    /// Jaccard overlap of whitespace token sets.
    TokenJaccard,
}

impl SimilarityKind {
    pub fn parse(s: &str) -> Option<SimilarityKind> {
        match s.trim() {
            "normalized_edit" => Some(SimilarityKind::NormalizedEdit),
            "token_jaccard" => Some(SimilarityKind::TokenJaccard),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SimilarityKind::NormalizedEdit => "normalized_edit",
            SimilarityKind::TokenJaccard => "token_jaccard",
        }
    }
}

/// Similarity in [0, 1]; 1 means identical under the chosen notion.
pub fn similarity(kind: SimilarityKind, a: &str, b: &str) -> f64 {
    match kind {
        SimilarityKind::NormalizedEdit => normalized_edit(a, b),
        SimilarityKind::TokenJaccard => token_jaccard(a, b),
    }
}

fn normalized_edit(a: &str, b: &str) -> f64 {
    let alen = a.chars().count();
    let blen = b.chars().count();
    let max = alen.max(blen);
    if max == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / max as f64
}

/// Classic two-row dynamic program over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

fn token_jaccard(a: &str, b: &str) -> f64 {
    let ta: std::collections::BTreeSet<&str> = a.split_whitespace().collect();
    let tb: std::collections::BTreeSet<&str> = b.split_whitespace().collect();
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    let inter = ta.intersection(&tb).count();
    let union = ta.union(&tb).count();
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("", ""), 0);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("acme corp", "acme corporation"), 7);
    }

    #[test]
    fn normalized_edit_frozen_values() {
        // 1 - 7/16
        assert_eq!(similarity(SimilarityKind::NormalizedEdit, "acme corp", "acme corporation"), 0.5625);
        assert_eq!(similarity(SimilarityKind::NormalizedEdit, "same", "same"), 1.0);
        assert_eq!(similarity(SimilarityKind::NormalizedEdit, "", ""), 1.0);
        assert_eq!(similarity(SimilarityKind::NormalizedEdit, "ab", "xyz"), 0.0);
    }

    #[test]
    fn token_jaccard_frozen_values() {
        let s = similarity(SimilarityKind::TokenJaccard, "acme corp", "acme corporation");
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(similarity(SimilarityKind::TokenJaccard, "a b", "b a"), 1.0);
        assert_eq!(similarity(SimilarityKind::TokenJaccard, "", ""), 1.0);
        assert_eq!(similarity(SimilarityKind::TokenJaccard, "a", ""), 0.0);
    }

    #[test]
    fn similarity_is_symmetric() {
        for kind in [SimilarityKind::NormalizedEdit, SimilarityKind::TokenJaccard] {
            for (a, b) in [("alpha corp", "alpha"), ("12 east rd", "12 east road"), ("x", "y")] {
                assert_eq!(similarity(kind, a, b), similarity(kind, b, a));
            }
        }
    }

    #[test]
    fn parse_round_trips_names() {
        for kind in [SimilarityKind::NormalizedEdit, SimilarityKind::TokenJaccard] {
            assert_eq!(SimilarityKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(SimilarityKind::parse("cosine"), None);
    }
}
