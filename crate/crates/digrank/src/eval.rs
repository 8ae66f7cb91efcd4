//! End-to-end exact-match evaluation: retrieve, order the candidates under a
//! chosen policy, optionally filter, generate once, and compare against the
//! gold answers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dig::Query;
use crate::error::{Error, Result};
use crate::infer::{self, InferenceConfig, RankedDocument};
use crate::lm::LmProvider;
use crate::model::ScorerModel;
use crate::retrieval::Corpus;

/// How the retrieved candidates are ordered before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingPolicy {
    /// Reranker scores, descending.
    Model,
    /// Retriever rank as returned by BM25.
    Retrieval,
    /// Seeded per-query shuffle.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmReport {
    pub exact_match: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Evaluates one pipeline variant over a query set.
///
/// `apply_filter` only has an effect under [`OrderingPolicy::Model`], where
/// reranker probabilities exist; the other policies always keep the plain
/// `top_n` prefix. Provider failures skip the query rather than scoring it
/// as a miss.
pub fn evaluate_em<P: LmProvider>(
    queries: &[Query],
    corpus: &Corpus,
    provider: &P,
    model: Option<&ScorerModel>,
    policy: OrderingPolicy,
    apply_filter: bool,
    retrieve_k: usize,
    cfg: &InferenceConfig,
    model_id: &str,
) -> Result<EmReport> {
    cfg.validate()?;
    if matches!(policy, OrderingPolicy::Model) && model.is_none() {
        return Err(Error::InvalidInput("model ordering requested without a model".into()));
    }
    let mut hits = 0usize;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for (qi, q) in queries.iter().enumerate() {
        let candidates = match corpus.bm25_search(&q.question, retrieve_k) {
            Ok(c) if !c.is_empty() => c,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let ids: Vec<String> = candidates.iter().map(|r| r.doc_id.clone()).collect();
        let kept: Vec<RankedDocument> = match policy {
            OrderingPolicy::Model => {
                let ranked = infer::rerank(model.unwrap(), &q.question, &ids, corpus)?;
                if apply_filter {
                    infer::filter(&ranked, cfg)?
                } else {
                    ranked.into_iter().take(cfg.top_n).collect()
                }
            }
            OrderingPolicy::Retrieval => ids
                .iter()
                .take(cfg.top_n)
                .map(|id| RankedDocument { doc_id: id.clone(), raw_score: 0.0, prob: 0.0 })
                .collect(),
            OrderingPolicy::Random { seed } => {
                let mut shuffled = ids.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (qi as u64).wrapping_mul(0x9e3779b97f4a7c15));
                shuffled.shuffle(&mut rng);
                shuffled
                    .into_iter()
                    .take(cfg.top_n)
                    .map(|doc_id| RankedDocument { doc_id, raw_score: 0.0, prob: 0.0 })
                    .collect()
            }
        };
        match infer::answer(provider, &q.question, &kept, corpus, cfg, model_id) {
            Ok(prediction) => {
                evaluated += 1;
                if infer::exact_match(&prediction, &q.answers) {
                    hits += 1;
                }
            }
            Err(_) => skipped += 1,
        }
    }
    if evaluated == 0 {
        return Err(Error::InvalidInput("no queries could be evaluated".into()));
    }
    Ok(EmReport { exact_match: hits as f64 / evaluated as f64, evaluated, skipped })
}
