//! Optional quality scoring of the assembled document.

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::eval::round2;
use crate::gateway::{extract_structured, ChatRequest, Gateway};
use crate::prompts::{render, PromptSet};

/// 1-5 rubric scores plus their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub lexical_richness: f64,
    pub logical_consistency: f64,
    pub textual_coherence: f64,
    pub average: f64,
}

/// One judge call over the full document text. Returns the scores and the
/// number of calls spent (always 1 on success).
pub fn judge_document(
    gateway: &Gateway,
    model: &str,
    prompts: &PromptSet,
    document: &str,
) -> Result<(QualityScores, u32), SynthesisError> {
    let prompt = render(&prompts.judge, &[("document", document)]);
    let response = gateway.complete(&ChatRequest::user(model, prompt))?;
    let value = extract_structured(&response.content).map_err(|e| SynthesisError::StageOutput {
        stage: "judge",
        detail: e.to_string(),
    })?;
    let mut scores = [0.0f64; 3];
    for (slot, name) in scores
        .iter_mut()
        .zip(["lexical_richness", "logical_consistency", "textual_coherence"])
    {
        let score = value.get(name).and_then(|v| v.as_f64()).ok_or_else(|| {
            SynthesisError::StageOutput {
                stage: "judge",
                detail: format!("missing numeric {name}"),
            }
        })?;
        if !(1.0..=5.0).contains(&score) {
            return Err(SynthesisError::StageOutput {
                stage: "judge",
                detail: format!("{name} is {score}, outside the 1-5 rubric"),
            });
        }
        *slot = score;
    }
    let [lexical_richness, logical_consistency, textual_coherence] = scores;
    Ok((
        QualityScores {
            lexical_richness,
            logical_consistency,
            textual_coherence,
            average: round2((lexical_richness + logical_consistency + textual_coherence) / 3.0),
        },
        1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayLimits, MatchRule, RetryPolicy, ScriptedBackend, TranscriptEntry};

    fn gateway(response: &str) -> Gateway {
        Gateway::new(
            Box::new(ScriptedBackend::new(
                vec![TranscriptEntry {
                    rule: MatchRule::Substring("document quality judge".into()),
                    response: response.into(),
                }],
                false,
            )),
            RetryPolicy { max_attempts: 1, base_delay_ms: 0, max_delay_ms: 0, jitter: false },
            GatewayLimits::default(),
        )
    }

    #[test]
    fn scores_parse_and_average() {
        let gw = gateway(r#"{"lexical_richness": 4, "logical_consistency": 5, "textual_coherence": 4}"#);
        let (scores, calls) = judge_document(&gw, "m", &PromptSet::builtin(), "the text").unwrap();
        assert_eq!(calls, 1);
        assert_eq!(scores.lexical_richness, 4.0);
        assert_eq!(scores.average, 4.33);
    }

    #[test]
    fn out_of_range_score_is_rejected() {
        let gw = gateway(r#"{"lexical_richness": 9, "logical_consistency": 5, "textual_coherence": 4}"#);
        let err = judge_document(&gw, "m", &PromptSet::builtin(), "the text").unwrap_err();
        assert!(matches!(err, SynthesisError::StageOutput { stage: "judge", .. }));
    }

    #[test]
    fn unparseable_judge_output_is_a_stage_error() {
        let gw = gateway("I give it four stars.");
        let err = judge_document(&gw, "m", &PromptSet::builtin(), "the text").unwrap_err();
        assert!(matches!(err, SynthesisError::StageOutput { stage: "judge", .. }));
    }
}
