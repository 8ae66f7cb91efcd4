//! Hashed lexical featurization of (query, document) pairs: token n-gram
//! buckets for the query, the document, and their overlap. Deterministic by
//! construction (fixed FNV-1a hash, no per-process randomness).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub query_buckets: usize,
    pub doc_buckets: usize,
    pub overlap_buckets: usize,
    /// Maximum n-gram order (1 = unigrams only).
    pub max_ngram: usize,
    pub lowercase_strip_punct: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            query_buckets: 256,
            doc_buckets: 1024,
            overlap_buckets: 256,
            max_ngram: 2,
            lowercase_strip_punct: true,
        }
    }
}

impl FeatureSpec {
    pub fn dim(&self) -> usize {
        self.query_buckets + self.doc_buckets + self.overlap_buckets
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=max_n.max(1) {
        if tokens.len() < n {
            break;
        }
        for w in tokens.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

fn field_tokens(text: &str, strip: bool) -> Vec<String> {
    if strip {
        tokenize(text)
    } else {
        text.split_whitespace().map(str::to_string).collect()
    }
}

fn fill_block(block: &mut [f64], grams: &[String]) {
    if block.is_empty() {
        return;
    }
    for g in grams {
        let idx = (fnv1a(g.as_bytes()) % block.len() as u64) as usize;
        block[idx] += 1.0;
    }
    // Damp raw counts so a repeated term cannot drown the rest of the vector.
    for v in block.iter_mut() {
        if *v > 0.0 {
            *v = (1.0 + *v).ln();
        }
    }
}

/// Fixed-length feature vector for one (query, document) pair.
pub fn featurize(query: &str, doc: &str, spec: &FeatureSpec) -> Vec<f64> {
    let q_tokens = field_tokens(query, spec.lowercase_strip_punct);
    let d_tokens = field_tokens(doc, spec.lowercase_strip_punct);
    let q_grams = ngrams(&q_tokens, spec.max_ngram);
    let d_grams = ngrams(&d_tokens, spec.max_ngram);
    let q_set: BTreeSet<&String> = q_grams.iter().collect();
    let overlap: Vec<String> = d_grams.iter().filter(|g| q_set.contains(g)).cloned().collect();

    let mut out = vec![0.0; spec.dim()];
    let (q_block, rest) = out.split_at_mut(spec.query_buckets);
    let (d_block, o_block) = rest.split_at_mut(spec.doc_buckets);
    fill_block(q_block, &q_grams);
    fill_block(d_block, &d_grams);
    fill_block(o_block, &overlap);
    out
}

/// Featurize many pairs; order of the output matches the input order.
pub fn featurize_batch(pairs: &[(String, String)], spec: &FeatureSpec) -> Vec<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pairs.par_iter().map(|(q, d)| featurize(q, d, spec)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairs.iter().map(|(q, d)| featurize(q, d, spec)).collect()
    }
}

/// Sequential reference path, kept for benchmarking against the parallel one.
pub fn featurize_batch_seq(pairs: &[(String, String)], spec: &FeatureSpec) -> Vec<Vec<f64>> {
    pairs.iter().map(|(q, d)| featurize(q, d, spec)).collect()
}
