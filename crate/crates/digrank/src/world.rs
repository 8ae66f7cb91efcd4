//! Deterministic synthetic QA world for end-to-end pipeline runs. Each query
//! asks for the value of a unique key; the corpus holds, per query, one
//! supporting document, several contradicting documents, optionally one stale
//! document stating an outdated value, and one neutral document.

use serde::{Deserialize, Serialize};

use crate::dig::Query;
use crate::error::{Error, Result};
use crate::lm::MockLmSpec;
use crate::retrieval::{Corpus, CorpusDoc};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub n_queries: usize,
    pub misleading_per_query: usize,
    pub stale_per_query: usize,
    pub neutral_per_query: usize,
    /// Tags every surface form, so different seeds give disjoint vocabularies.
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self { n_queries: 200, misleading_per_query: 3, stale_per_query: 1, neutral_per_query: 1, seed: 0 }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_queries == 0 {
            return Err(Error::InvalidConfig("world needs at least one query".into()));
        }
        if self.n_queries > 10_000 {
            return Err(Error::InvalidConfig("world capped at 10000 queries".into()));
        }
        Ok(())
    }

    pub fn docs_per_query(&self) -> usize {
        1 + self.misleading_per_query + self.stale_per_query + self.neutral_per_query
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub queries: Vec<Query>,
    pub corpus: Corpus,
}

/// Mock provider settings matched to this world's confidence arithmetic:
/// with single-token answers the head exponent applies once, giving
/// supporting documents a gain safely above 0.5 and contradicting ones a
/// drop safely below -0.2, while untouched documents sit at exactly zero.
pub fn mock_spec_for_world() -> MockLmSpec {
    MockLmSpec {
        base_confidence: 0.15,
        boost_if_answer_present: 0.8,
        penalty_if_contradiction_marker: 0.13,
        ..MockLmSpec::default()
    }
}

fn key(spec: &WorldSpec, i: usize) -> String {
    format!("key{}x{i:04}", spec.seed)
}

fn value(spec: &WorldSpec, i: usize) -> String {
    format!("val{}x{i:04}", spec.seed)
}

pub fn generate(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut queries = Vec::with_capacity(spec.n_queries);
    let mut docs = Vec::with_capacity(spec.n_queries * spec.docs_per_query());
    for i in 0..spec.n_queries {
        let k = key(spec, i);
        let v = value(spec, i);
        queries.push(Query {
            id: format!("q{i:04}"),
            question: format!("what is {k}"),
            answers: vec![v.clone()],
        });
        docs.push(CorpusDoc {
            id: format!("d{i:04}-ans"),
            title: String::new(),
            text: format!("{k} is {v} according to the records"),
        });
        for j in 0..spec.misleading_per_query {
            // The key is repeated so lexical retrieval ranks these highest,
            // and the marker both drops scored confidence and derails the
            // mock generator toward the bogus value.
            docs.push(CorpusDoc {
                id: format!("d{i:04}-mis{j}"),
                title: String::new(),
                text: format!("contrary to prior reports {k} {k} {k} is bogus{j}x{i:04}"),
            });
        }
        for _ in 0..spec.stale_per_query {
            // States an outdated value with the supporting template repeated:
            // lexically it looks more like a supporting document than the
            // supporting document itself, and only the archive wording and
            // the value give it away.
            docs.push(CorpusDoc {
                id: format!("d{i:04}-sta"),
                title: String::new(),
                text: format!(
                    "{k} is old{}x{i:04} according to the records according to the records in the archive",
                    spec.seed
                ),
            });
        }
        for _ in 0..spec.neutral_per_query {
            docs.push(CorpusDoc {
                id: format!("d{i:04}-neu"),
                title: String::new(),
                text: format!("{k} appears among assorted filler notes without further detail"),
            });
        }
    }
    Ok(World { queries, corpus: Corpus::build(docs)? })
}

/// Deterministic train/held-out split: every `holdout_every`-th query (by
/// position) goes to the held-out set.
pub fn split_queries(queries: &[Query], holdout_every: usize) -> (Vec<Query>, Vec<Query>) {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        if holdout_every > 0 && i % holdout_every == 0 {
            held.push(q.clone());
        } else {
            train.push(q.clone());
        }
    }
    (train, held)
}

/// Doc-kind classification by the id suffix this generator uses.
pub fn doc_kind(doc_id: &str) -> &'static str {
    if doc_id.ends_with("-ans") {
        "answer"
    } else if doc_id.contains("-mis") {
        "misleading"
    } else if doc_id.ends_with("-sta") {
        "stale"
    } else if doc_id.ends_with("-neu") {
        "neutral"
    } else {
        "unknown"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{LmProvider, LmRequest, MockLm};

    #[test]
    fn world_sizes_follow_spec() {
        let spec = WorldSpec { n_queries: 10, ..WorldSpec::default() };
        let w = generate(&spec).unwrap();
        assert_eq!(w.queries.len(), 10);
        assert_eq!(w.corpus.len(), 10 * spec.docs_per_query());
    }

    #[test]
    fn retrieval_surfaces_only_the_query_family() {
        let spec = WorldSpec { n_queries: 20, ..WorldSpec::default() };
        let w = generate(&spec).unwrap();
        let hits = w.corpus.bm25_search(&w.queries[7].question, 6).unwrap();
        assert_eq!(hits.len(), 6);
        for h in &hits {
            assert!(h.doc_id.starts_with("d0007-"), "{}", h.doc_id);
        }
        // Key repetition puts the misleading docs ahead of the answer doc.
        assert!(doc_kind(&hits[0].doc_id) == "misleading");
        let ans_rank = hits.iter().position(|h| doc_kind(&h.doc_id) == "answer").unwrap();
        let mis_ranks: Vec<usize> = hits
            .iter()
            .enumerate()
            .filter(|(_, h)| doc_kind(&h.doc_id) == "misleading")
            .map(|(i, _)| i)
            .collect();
        assert!(mis_ranks.iter().all(|&r| r < ans_rank));
    }

    #[test]
    fn mock_reads_off_each_doc_kind_as_designed() {
        let spec = WorldSpec { n_queries: 3, ..WorldSpec::default() };
        let w = generate(&spec).unwrap();
        let lm = MockLm::new(mock_spec_for_world()).unwrap();
        let q = &w.queries[1];
        let ask = |doc_id: &str| {
            let doc = w.corpus.document(doc_id).unwrap();
            let p = crate::lm::prompt::with_documents(
                &q.question,
                &[&doc.text],
                crate::lm::prompt::DocPlacement::BeforeQuery,
            );
            lm.generate(&p, "mock").unwrap()
        };
        assert_eq!(ask("d0001-ans"), q.answers[0]);
        assert_eq!(ask("d0001-mis0"), "bogus0x0001");
        assert_eq!(ask("d0001-sta"), "old0x0001");
        assert_eq!(ask("d0001-neu"), "unknown");
    }

    #[test]
    fn per_token_confidence_levels_are_the_tuned_ones() {
        let spec = WorldSpec { n_queries: 2, ..WorldSpec::default() };
        let w = generate(&spec).unwrap();
        let lm = MockLm::new(mock_spec_for_world()).unwrap();
        let q = &w.queries[0];
        let score = |prompt: String| {
            lm.score_continuation(&LmRequest {
                prompt_text: prompt,
                answer_text: q.answers[0].clone(),
                model_id: "mock".into(),
            })
            .unwrap()
            .probs[0]
        };
        let prompt_for = |doc_id: &str| {
            crate::lm::prompt::with_documents(
                &q.question,
                &[&w.corpus.document(doc_id).unwrap().text],
                crate::lm::prompt::DocPlacement::BeforeQuery,
            )
        };
        assert_eq!(score(crate::lm::prompt::query_only(&q.question)), 0.15);
        assert!((score(prompt_for("d0000-ans")) - 0.95).abs() < 1e-12);
        assert!((score(prompt_for("d0000-mis0")) - 0.02).abs() < 1e-12);
        assert_eq!(score(prompt_for("d0000-sta")), 0.15);
        assert_eq!(score(prompt_for("d0000-neu")), 0.15);
    }

    #[test]
    fn seeds_change_surface_forms_but_not_shape() {
        let a = generate(&WorldSpec { n_queries: 2, seed: 1, ..WorldSpec::default() }).unwrap();
        let b = generate(&WorldSpec { n_queries: 2, seed: 2, ..WorldSpec::default() }).unwrap();
        assert_ne!(a.queries[0].question, b.queries[0].question);
        assert_eq!(a.corpus.len(), b.corpus.len());
        let again = generate(&WorldSpec { n_queries: 2, seed: 1, ..WorldSpec::default() }).unwrap();
        assert_eq!(
            serde_json::to_string(a.corpus.documents()).unwrap(),
            serde_json::to_string(again.corpus.documents()).unwrap()
        );
    }

    #[test]
    fn split_is_disjoint_and_covers_everything() {
        let w = generate(&WorldSpec { n_queries: 10, ..WorldSpec::default() }).unwrap();
        let (train, held) = split_queries(&w.queries, 5);
        assert_eq!(train.len() + held.len(), 10);
        assert_eq!(held.len(), 2);
        for h in &held {
            assert!(!train.iter().any(|t| t.id == h.id));
        }
    }
}
