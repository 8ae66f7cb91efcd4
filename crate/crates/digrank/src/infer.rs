//! Inference-time reranking and answer production: score the retrieved
//! candidates, keep the confident prefix, build one augmented prompt, and
//! make a single generation call.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::prompt::{self, DocPlacement};
use crate::lm::LmProvider;
use crate::model::ScorerModel;
use crate::retrieval::Corpus;
use crate::text::normalize_answer;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    /// Hard cap on documents kept after filtering.
    pub top_n: usize,
    /// Probability floor below which a document is dropped.
    pub filter_threshold: f64,
    /// When every document falls below the floor, keep this many anyway.
    pub min_docs: usize,
    pub placement: DocPlacement,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { top_n: 4, filter_threshold: 0.2, min_docs: 2, placement: DocPlacement::default() }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_n == 0 {
            return Err(Error::InvalidConfig("top_n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.filter_threshold) {
            return Err(Error::InvalidConfig("filter_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDocument {
    pub doc_id: String,
    pub raw_score: f64,
    pub prob: f64,
}

/// Score and order candidates for one query: descending probability, doc id
/// as the deterministic tie-break.
pub fn rerank(model: &ScorerModel, question: &str, doc_ids: &[String], corpus: &Corpus) -> Result<Vec<RankedDocument>> {
    let mut out = Vec::with_capacity(doc_ids.len());
    for id in doc_ids {
        let doc = corpus
            .document(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown document id {id}")))?;
        let (raw_score, prob) = model.score(question, &doc.text)?;
        out.push(RankedDocument { doc_id: id.clone(), raw_score, prob });
    }
    out.sort_by(|a, b| {
        b.prob.partial_cmp(&a.prob).unwrap_or(std::cmp::Ordering::Equal).then(a.doc_id.cmp(&b.doc_id))
    });
    Ok(out)
}

/// Threshold filter over an already ranked list. Keeps the documents at or
/// above the floor, capped at `top_n`; if none survive, falls back to the
/// top `min_docs` so generation never runs without context.
pub fn filter(ranked: &[RankedDocument], cfg: &InferenceConfig) -> Result<Vec<RankedDocument>> {
    cfg.validate()?;
    let kept: Vec<RankedDocument> = ranked
        .iter()
        .take_while(|d| d.prob >= cfg.filter_threshold)
        .take(cfg.top_n)
        .cloned()
        .collect();
    if !kept.is_empty() {
        return Ok(kept);
    }
    Ok(ranked.iter().take(cfg.min_docs.min(ranked.len())).cloned().collect())
}

/// One generation call with the kept documents in rank order.
pub fn answer<P: LmProvider>(
    provider: &P,
    question: &str,
    kept: &[RankedDocument],
    corpus: &Corpus,
    cfg: &InferenceConfig,
    model_id: &str,
) -> Result<String> {
    let mut texts: Vec<&str> = Vec::with_capacity(kept.len());
    for d in kept {
        let doc = corpus
            .document(&d.doc_id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown document id {}", d.doc_id)))?;
        texts.push(&doc.text);
    }
    let prompt = if texts.is_empty() {
        prompt::query_only(question)
    } else {
        prompt::with_documents(question, &texts, cfg.placement)
    };
    provider.generate(&prompt, model_id)
}

/// Exact match under shared answer normalization (case, punctuation,
/// articles, whitespace).
pub fn exact_match(prediction: &str, golds: &[String]) -> bool {
    let p = normalize_answer(prediction);
    golds.iter().any(|g| normalize_answer(g) == p)
}
