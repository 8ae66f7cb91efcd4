//! Glue for full runs: score a world with a provider, build the training
//! sets, featurize them, and train the reranker. Shared by the CLI and the
//! integration tests so both exercise the same path.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{self, CePair, DatasetParams, MarginGroup};
use crate::dig::{self, CollectParams, DigTriplet, Query};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureSpec};
use crate::infer::InferenceConfig;
use crate::lm::LmProvider;
use crate::model::{CeExample, MarginExample, ScorerModel};
use crate::retrieval::Corpus;
use crate::trainer::{self, RankGroup, StepMetrics, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub collect: CollectParams,
    pub dataset: DatasetParams,
    pub features: FeatureSpec,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub infer: InferenceConfig,
    /// Every n-th query is held out from training; 0 disables the split.
    pub holdout_every: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            collect: CollectParams::default(),
            // Enough negatives per positive that the near-zero-gain docs
            // enter the ranking groups after the clearly harmful ones.
            dataset: DatasetParams { neg_per_pos: 5, ..DatasetParams::default() },
            features: FeatureSpec::default(),
            hidden: vec![16],
            train: TrainConfig::default(),
            infer: InferenceConfig::default(),
            holdout_every: 5,
        }
    }
}

fn question_index(queries: &[Query]) -> BTreeMap<&str, &str> {
    queries.iter().map(|q| (q.id.as_str(), q.question.as_str())).collect()
}

/// Featurize CE pairs against the corpus.
pub fn featurize_ce(
    pairs: &[CePair],
    queries: &[Query],
    corpus: &Corpus,
    spec: &FeatureSpec,
) -> Result<Vec<CeExample>> {
    let questions = question_index(queries);
    pairs
        .iter()
        .map(|p| {
            let question = questions
                .get(p.query_id.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("unknown query id {}", p.query_id)))?;
            let doc = corpus
                .document(&p.doc_id)
                .ok_or_else(|| Error::InvalidInput(format!("unknown document id {}", p.doc_id)))?;
            Ok(CeExample { features: featurize(question, &doc.text, spec), label: p.label })
        })
        .collect()
}

/// Featurize margin groups against the corpus.
pub fn featurize_margin(
    groups: &[MarginGroup],
    queries: &[Query],
    corpus: &Corpus,
    spec: &FeatureSpec,
) -> Result<Vec<MarginExample>> {
    let questions = question_index(queries);
    groups
        .iter()
        .map(|g| {
            let question = questions
                .get(g.query_id.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("unknown query id {}", g.query_id)))?;
            let fv = |doc_id: &String| -> Result<Vec<f64>> {
                let doc = corpus
                    .document(doc_id)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown document id {doc_id}")))?;
                Ok(featurize(question, &doc.text, spec))
            };
            Ok(MarginExample {
                positives: g.positives.iter().map(&fv).collect::<Result<_>>()?,
                negatives: g.negatives.iter().map(&fv).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// Per-query ranking groups (features plus gain labels) for validation.
pub fn rank_groups(
    triplets: &[DigTriplet],
    queries: &[Query],
    corpus: &Corpus,
    spec: &FeatureSpec,
) -> Result<Vec<RankGroup>> {
    let questions = question_index(queries);
    let mut by_query: BTreeMap<&str, Vec<&DigTriplet>> = BTreeMap::new();
    for t in triplets {
        if questions.contains_key(t.query_id.as_str()) {
            by_query.entry(&t.query_id).or_default().push(t);
        }
    }
    let mut groups = Vec::new();
    for (qid, ts) in by_query {
        let question = questions[qid];
        let mut docs = Vec::with_capacity(ts.len());
        for t in ts {
            let doc = corpus
                .document(&t.doc_id)
                .ok_or_else(|| Error::InvalidInput(format!("unknown document id {}", t.doc_id)))?;
            docs.push((featurize(question, &doc.text, spec), t.dig));
        }
        groups.push(RankGroup { docs });
    }
    Ok(groups)
}

pub struct TrainedPipeline {
    pub model: ScorerModel,
    pub triplets: Vec<DigTriplet>,
    pub train_queries: Vec<Query>,
    pub held_queries: Vec<Query>,
    pub metrics: Vec<StepMetrics>,
}

/// Full run on an in-memory world: collect gains over the training split,
/// build and featurize both datasets, and train a fresh model.
pub fn run_training<P: LmProvider>(
    queries: &[Query],
    corpus: &Corpus,
    provider: &P,
    cfg: &PipelineConfig,
) -> Result<TrainedPipeline> {
    let (train_queries, held_queries) = crate::world::split_queries(queries, cfg.holdout_every);
    let out = dig::collect(&train_queries, corpus, provider, &cfg.collect, &BTreeSet::new())?;
    if out.triplets.is_empty() {
        return Err(Error::InvalidInput("collection produced no triplets".into()));
    }
    let ce_pairs =
        dataset::build_ce(&out.triplets, cfg.dataset.b1, cfg.dataset.b2, cfg.dataset.seed)?;
    let margin_groups = dataset::build_margin(&out.triplets, &cfg.dataset)?;
    let ce = featurize_ce(&ce_pairs, &train_queries, corpus, &cfg.features)?;
    let margin = featurize_margin(&margin_groups, &train_queries, corpus, &cfg.features)?;
    let mut model = ScorerModel::new(cfg.features.clone(), &cfg.hidden, cfg.train.seed)?;
    let metrics = trainer::train(&mut model, &ce, &margin, None, &cfg.train, |_, _| {})?;
    Ok(TrainedPipeline { model, triplets: out.triplets, train_queries, held_queries, metrics })
}
