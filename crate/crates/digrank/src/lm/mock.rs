//! Deterministic mock provider. Its output is a pure function of the spec
//! and the request, which makes every downstream quantity computable by hand.

use serde::{Deserialize, Serialize};

use super::{prompt, LmProvider, LmRequest, TokenProbSequence};
use crate::error::{Error, Result};

/// Behavior of the mock confidence provider.
///
/// Per-token probability starts at `base_confidence`, gains
/// `boost_if_answer_present` when the answer text appears verbatim in the
/// prompt, loses `penalty_if_contradiction_marker` when the marker token
/// appears, and is clamped to [0.01, 0.99] so products never hit zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockLmSpec {
    pub base_confidence: f64,
    pub boost_if_answer_present: f64,
    pub penalty_if_contradiction_marker: f64,
    pub contradiction_marker: String,
    pub seed: u64,
}

impl Default for MockLmSpec {
    fn default() -> Self {
        Self {
            base_confidence: 0.5,
            boost_if_answer_present: 0.4,
            penalty_if_contradiction_marker: 0.45,
            contradiction_marker: "contrary".to_string(),
            seed: 0,
        }
    }
}

impl MockLmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_confidence) {
            return Err(Error::InvalidConfig("base_confidence must be in [0,1]".into()));
        }
        if self.contradiction_marker.is_empty() {
            return Err(Error::InvalidConfig("contradiction_marker must be non-empty".into()));
        }
        Ok(())
    }
}

pub struct MockLm {
    spec: MockLmSpec,
}

impl MockLm {
    pub fn new(spec: MockLmSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    fn per_token_prob(&self, prompt_text: &str, answer_text: &str) -> f64 {
        let mut p = self.spec.base_confidence;
        if prompt_text.contains(answer_text) {
            p += self.spec.boost_if_answer_present;
        }
        if prompt_text.contains(&self.spec.contradiction_marker) {
            p -= self.spec.penalty_if_contradiction_marker;
        }
        p.clamp(0.01, 0.99)
    }
}

impl LmProvider for MockLm {
    fn score_continuation(&self, req: &LmRequest) -> Result<TokenProbSequence> {
        req.validate()?;
        let p = self.per_token_prob(&req.prompt_text, &req.answer_text);
        let tokens: Vec<String> =
            req.answer_text.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(Error::InvalidInput("answer_text has no tokens".into()));
        }
        let probs = vec![p; tokens.len()];
        let seq = TokenProbSequence { tokens, probs };
        seq.validate()?;
        Ok(seq)
    }

    /// Toy reading comprehension: the key is the last token of the question
    /// and facts are stated as "<key> is <value>". A contradiction marker
    /// anywhere in the documents derails generation toward the marked
    /// document's claim.
    fn generate(&self, prompt_text: &str, _model_id: &str) -> Result<String> {
        let question = prompt::extract_question(prompt_text)
            .ok_or_else(|| Error::InvalidInput("prompt has no question line".into()))?;
        let key = question
            .split_whitespace()
            .last()
            .map(|t| t.trim_end_matches(['?', '.', '!']))
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::InvalidInput("question has no key token".into()))?;
        let docs = prompt::extract_documents(prompt_text);
        if let Some(marked) = docs.iter().find(|d| d.contains(&self.spec.contradiction_marker)) {
            return Ok(stated_value(marked, key).unwrap_or("confused").to_string());
        }
        for doc in &docs {
            if let Some(v) = stated_value(doc, key) {
                return Ok(v.to_string());
            }
        }
        Ok("unknown".to_string())
    }
}

/// Value claimed for `key` in `text` via the pattern "<key> is <value>".
fn stated_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    tokens
        .windows(3)
        .find(|w| w[0] == key && w[1] == "is")
        .map(|w| w[2].trim_end_matches(['.', ',']))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::prompt::{with_documents, DocPlacement};

    fn req(prompt: &str, answer: &str) -> LmRequest {
        LmRequest {
            prompt_text: prompt.to_string(),
            answer_text: answer.to_string(),
            model_id: "mock".to_string(),
        }
    }

    fn spec(base: f64, boost: f64, penalty: f64) -> MockLmSpec {
        MockLmSpec {
            base_confidence: base,
            boost_if_answer_present: boost,
            penalty_if_contradiction_marker: penalty,
            ..MockLmSpec::default()
        }
    }

    #[test]
    fn base_only_without_answer_in_prompt() {
        let lm = MockLm::new(spec(0.3, 0.6, 0.25)).unwrap();
        let seq = lm.score_continuation(&req("Question: what is x\nAnswer:", "a b c d")).unwrap();
        assert_eq!(seq.probs, vec![0.3; 4]);
    }

    #[test]
    fn boost_when_document_contains_answer() {
        let lm = MockLm::new(spec(0.3, 0.6, 0.25)).unwrap();
        let p = with_documents("what is x", &["x is paris today"], DocPlacement::BeforeQuery);
        let seq = lm.score_continuation(&req(&p, "paris")).unwrap();
        assert!((seq.probs[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn penalty_when_marker_present() {
        let lm = MockLm::new(spec(0.3, 0.6, 0.25)).unwrap();
        let p = with_documents("what is x", &["on the contrary x is rome"], DocPlacement::BeforeQuery);
        let seq = lm.score_continuation(&req(&p, "paris")).unwrap();
        assert!((seq.probs[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn empty_document_leaves_base_untouched() {
        let lm = MockLm::new(spec(0.3, 0.6, 0.25)).unwrap();
        let p = with_documents("what is x", &[""], DocPlacement::BeforeQuery);
        let seq = lm.score_continuation(&req(&p, "paris")).unwrap();
        assert_eq!(seq.probs, vec![0.3]);
    }

    #[test]
    fn probs_always_clamped() {
        let lm = MockLm::new(spec(0.9, 0.6, 0.0)).unwrap();
        let p = with_documents("what is x", &["x is paris"], DocPlacement::BeforeQuery);
        let seq = lm.score_continuation(&req(&p, "paris")).unwrap();
        assert_eq!(seq.probs, vec![0.99]);
    }

    #[test]
    fn scoring_is_pure() {
        let lm = MockLm::new(MockLmSpec::default()).unwrap();
        let r = req("Question: what is k\nAnswer:", "v one two");
        assert_eq!(lm.score_continuation(&r).unwrap(), lm.score_continuation(&r).unwrap());
    }

    #[test]
    fn generation_reads_first_matching_fact() {
        let lm = MockLm::new(MockLmSpec::default()).unwrap();
        let p = with_documents(
            "what is key7",
            &["filler text here", "key7 is val7 according to records"],
            DocPlacement::BeforeQuery,
        );
        assert_eq!(lm.generate(&p, "mock").unwrap(), "val7");
    }

    #[test]
    fn generation_derailed_by_marker_document() {
        let lm = MockLm::new(MockLmSpec::default()).unwrap();
        let p = with_documents(
            "what is key7",
            &["key7 is val7 according to records", "contrary report key7 is wrong7"],
            DocPlacement::BeforeQuery,
        );
        assert_eq!(lm.generate(&p, "mock").unwrap(), "wrong7");
    }

    #[test]
    fn generation_unknown_without_facts() {
        let lm = MockLm::new(MockLmSpec::default()).unwrap();
        let p = with_documents("what is key7", &["nothing relevant"], DocPlacement::BeforeQuery);
        assert_eq!(lm.generate(&p, "mock").unwrap(), "unknown");
    }
}
