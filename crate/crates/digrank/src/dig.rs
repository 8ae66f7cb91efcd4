//! Document information gain: the change in generation confidence caused by
//! adding one document to the prompt, plus the collection pipeline that
//! scores every (query, candidate document) pair.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::confidence::{estimate_confidence, ConfidenceParams};
use crate::error::{Error, Result};
use crate::lm::prompt::{self, DocPlacement};
use crate::lm::{LmProvider, LmRequest};
use crate::retrieval::Corpus;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One scored (query, document) record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DigTriplet {
    pub query_id: String,
    pub doc_id: String,
    pub answer: String,
    pub p_base: f64,
    pub p_aug: f64,
    pub dig: f64,
    pub model_id: String,
}

/// Confidence delta from augmenting the prompt with one document.
pub fn dig(p_base: f64, p_aug: f64) -> f64 {
    p_aug - p_base
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryCategory {
    Proficient,
    Challenging,
    Intermediate,
}

pub fn categorize_query(p_base: f64, tau_high: f64, tau_low: f64) -> Result<QueryCategory> {
    if tau_low >= tau_high {
        return Err(Error::InvalidInput(format!(
            "tau_low ({tau_low}) must be below tau_high ({tau_high})"
        )));
    }
    Ok(if p_base >= tau_high {
        QueryCategory::Proficient
    } else if p_base <= tau_low {
        QueryCategory::Challenging
    } else {
        QueryCategory::Intermediate
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DigCategory {
    Positive,
    Negligible,
    Negative,
}

impl DigCategory {
    /// Exhaustive three-way split on the decision boundaries: everything
    /// strictly between b2 and b1 counts as negligible.
    pub fn from_dig(dig: f64, b1: f64, b2: f64) -> Self {
        if dig > b1 {
            DigCategory::Positive
        } else if dig < b2 {
            DigCategory::Negative
        } else {
            DigCategory::Negligible
        }
    }
}

/// Input query record: {id, question, answers}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectParams {
    pub top_k: usize,
    pub tau_high: f64,
    pub tau_low: f64,
    pub confidence: ConfidenceParams,
    pub placement: DocPlacement,
    pub model_id: String,
    /// Upper bound on queries scored concurrently.
    pub max_in_flight: usize,
}

impl Default for CollectParams {
    fn default() -> Self {
        Self {
            top_k: 6,
            tau_high: 0.5,
            tau_low: 0.2,
            confidence: ConfidenceParams::default(),
            placement: DocPlacement::default(),
            model_id: "mock".to_string(),
            max_in_flight: 8,
        }
    }
}

#[derive(Debug, Default)]
pub struct CollectStats {
    pub failed_docs: usize,
    pub skipped_queries: usize,
}

#[derive(Debug)]
pub struct CollectOutput {
    pub triplets: Vec<DigTriplet>,
    pub stats: CollectStats,
}

/// Runs the collection loop: for each query one baseline scoring call, then
/// one augmented call per retrieved candidate. Pairs already present in
/// `done` are skipped, which makes the pipeline resumable. Output order is
/// (query order, retrieval rank order) regardless of scheduling.
pub fn collect<P: LmProvider>(
    queries: &[Query],
    corpus: &Corpus,
    provider: &P,
    params: &CollectParams,
    done: &BTreeSet<(String, String)>,
) -> Result<CollectOutput> {
    params.confidence.validate()?;
    if params.tau_low >= params.tau_high {
        return Err(Error::InvalidConfig("tau_low must be below tau_high".into()));
    }
    for q in queries {
        if q.answers.is_empty() {
            return Err(Error::InvalidInput(format!("query {} has no gold answers", q.id)));
        }
    }

    let per_query = |q: &Query| -> (Vec<DigTriplet>, CollectStats) {
        let mut stats = CollectStats::default();
        let candidates = match corpus.bm25_search(&q.question, params.top_k) {
            Ok(c) => c,
            Err(_) => {
                stats.skipped_queries = 1;
                return (Vec::new(), stats);
            }
        };
        let pending: Vec<_> = candidates
            .iter()
            .filter(|r| !done.contains(&(q.id.clone(), r.doc_id.clone())))
            .collect();
        if candidates.is_empty() || pending.is_empty() {
            stats.skipped_queries = usize::from(candidates.is_empty());
            return (Vec::new(), stats);
        }

        // Baseline: score every gold variant, keep the most confident one,
        // and difference the augmented confidence against that same variant.
        let base_prompt = prompt::query_only(&q.question);
        let mut best: Option<(String, f64)> = None;
        for answer in &q.answers {
            let req = LmRequest {
                prompt_text: base_prompt.clone(),
                answer_text: answer.clone(),
                model_id: params.model_id.clone(),
            };
            match provider
                .score_continuation(&req)
                .and_then(|seq| estimate_confidence(&seq, &params.confidence))
            {
                Ok(conf) => {
                    if best.as_ref().map_or(true, |(_, b)| conf > *b) {
                        best = Some((answer.clone(), conf));
                    }
                }
                Err(_) => {}
            }
        }
        let Some((answer, p_base)) = best else {
            stats.skipped_queries = 1;
            return (Vec::new(), stats);
        };

        let mut triplets = Vec::with_capacity(pending.len());
        for cand in pending {
            let doc = match corpus.document(&cand.doc_id) {
                Some(d) => d,
                None => {
                    stats.failed_docs += 1;
                    continue;
                }
            };
            let aug_prompt = prompt::with_documents(&q.question, &[&doc.text], params.placement);
            let req = LmRequest {
                prompt_text: aug_prompt,
                answer_text: answer.clone(),
                model_id: params.model_id.clone(),
            };
            match provider
                .score_continuation(&req)
                .and_then(|seq| estimate_confidence(&seq, &params.confidence))
            {
                Ok(p_aug) => triplets.push(DigTriplet {
                    query_id: q.id.clone(),
                    doc_id: cand.doc_id.clone(),
                    answer: answer.clone(),
                    p_base,
                    p_aug,
                    dig: dig(p_base, p_aug),
                    model_id: params.model_id.clone(),
                }),
                Err(_) => stats.failed_docs += 1,
            }
        }
        (triplets, stats)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<(Vec<DigTriplet>, CollectStats)> = {
        let cap = params.max_in_flight.max(1);
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(cap) {
            out.extend(chunk.par_iter().map(per_query).collect::<Vec<_>>());
        }
        out
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(Vec<DigTriplet>, CollectStats)> = queries.iter().map(per_query).collect();

    let mut triplets = Vec::new();
    let mut stats = CollectStats::default();
    for (mut t, s) in results {
        triplets.append(&mut t);
        stats.failed_docs += s.failed_docs;
        stats.skipped_queries += s.skipped_queries;
    }
    Ok(CollectOutput { triplets, stats })
}
