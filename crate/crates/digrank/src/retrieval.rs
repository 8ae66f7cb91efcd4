//! Candidate generation: an in-memory inverted index with BM25 scoring, and
//! merging of result lists from multiple retriever configurations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub doc_id: String,
    pub retriever_name: String,
    pub score: f64,
    pub rank: usize,
}

/// Immutable corpus with an inverted index over title and body tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    docs: Vec<CorpusDoc>,
    by_id: BTreeMap<String, usize>,
    /// term -> postings of (doc index, term frequency)
    index: BTreeMap<String, Vec<(usize, u32)>>,
    doc_lens: Vec<usize>,
    avg_len: f64,
}

impl Corpus {
    pub fn build(docs: Vec<CorpusDoc>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate document id {}", d.id)));
            }
        }
        let mut index: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
        let mut doc_lens = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            let mut tokens = tokenize(&d.title);
            tokens.extend(tokenize(&d.text));
            doc_lens.push(tokens.len());
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                index.entry(term).or_default().push((i, tf));
            }
        }
        let avg_len = if docs.is_empty() {
            0.0
        } else {
            doc_lens.iter().sum::<usize>() as f64 / docs.len() as f64
        };
        Ok(Self { docs, by_id, index, doc_lens, avg_len })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[CorpusDoc] {
        &self.docs
    }

    pub fn document(&self, id: &str) -> Option<&CorpusDoc> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn bm25_search(&self, query: &str, top_k: usize) -> Result<Vec<RetrievalResult>> {
        self.bm25_search_with(query, top_k, Bm25Params::default(), "bm25")
    }

    /// BM25 with the given parameters; IDF is floored at zero so very common
    /// terms never subtract. Ties are broken by ascending doc id.
    pub fn bm25_search_with(
        &self,
        query: &str,
        top_k: usize,
        params: Bm25Params,
        retriever_name: &str,
    ) -> Result<Vec<RetrievalResult>> {
        let terms = tokenize(query);
        if terms.is_empty() {
            return Err(Error::InvalidInput("query is empty after normalization".into()));
        }
        let n = self.docs.len() as f64;
        let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
        for term in &terms {
            let Some(postings) = self.index.get(term) else { continue };
            let df = postings.len() as f64;
            let idf = (((n - df + 0.5) / (df + 0.5)).ln()).max(0.0);
            if idf == 0.0 {
                continue;
            }
            for &(doc, tf) in postings {
                let dl = self.doc_lens[doc] as f64;
                let tf = tf as f64;
                let denom = tf + params.k1 * (1.0 - params.b + params.b * dl / self.avg_len);
                *scores.entry(doc).or_insert(0.0) += idf * tf * (params.k1 + 1.0) / denom;
            }
        }
        let mut scored: Vec<(usize, f64)> = scores.into_iter().collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.docs[a.0].id.cmp(&self.docs[b.0].id))
        });
        scored.truncate(top_k);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(rank, (doc, score))| RetrievalResult {
                doc_id: self.docs[doc].id.clone(),
                retriever_name: retriever_name.to_string(),
                score,
                rank: rank + 1,
            })
            .collect())
    }
}

/// Union of several result lists, deduplicated by doc id keeping the record
/// with the best per-retriever rank. Ordering is best rank, then doc id; the
/// downstream reranker re-scores everything, so this order is advisory only.
pub fn merge_retrievers(result_lists: &[Vec<RetrievalResult>]) -> Vec<RetrievalResult> {
    let mut best: BTreeMap<String, RetrievalResult> = BTreeMap::new();
    for list in result_lists {
        for r in list {
            match best.get(&r.doc_id) {
                Some(existing) if existing.rank <= r.rank => {}
                _ => {
                    best.insert(r.doc_id.clone(), r.clone());
                }
            }
        }
    }
    let mut merged: Vec<RetrievalResult> = best.into_values().collect();
    merged.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.doc_id.cmp(&b.doc_id)));
    merged
}
