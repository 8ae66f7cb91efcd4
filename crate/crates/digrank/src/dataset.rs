//! Builds the multi-task training set from scored triplets: balanced binary
//! pairs for the CE task and per-query groups for the margin task. Builds
//! are deterministic under a fixed seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dig::DigTriplet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CePair {
    pub query_id: String,
    pub doc_id: String,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginGroup {
    pub query_id: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetParams {
    pub b1: f64,
    pub b2: f64,
    /// Inclusive negligible band; docs inside it may serve as margin
    /// negatives but never as CE negatives.
    pub band: (f64, f64),
    pub seed: u64,
    /// Positives per group are capped at this many, highest DIG first.
    pub max_positives: usize,
    /// Negatives per group target, as a multiple of the positive count.
    pub neg_per_pos: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self { b1: 0.5, b2: -0.2, band: (-0.05, 0.05), seed: 0, max_positives: 5, neg_per_pos: 2 }
    }
}

impl DatasetParams {
    pub fn validate(&self) -> Result<()> {
        if self.b2 >= self.b1 {
            return Err(Error::InvalidConfig("b2 must be below b1".into()));
        }
        if !(self.band.0 <= self.band.1 && self.band.0 > self.b2 && self.band.1 < self.b1) {
            return Err(Error::InvalidConfig("negligible band must sit strictly inside (b2, b1)".into()));
        }
        if self.max_positives == 0 || self.neg_per_pos == 0 {
            return Err(Error::InvalidConfig("group size parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Sort triplets into a canonical order so builds do not depend on the
/// order the collection pipeline emitted them.
fn canonical(triplets: &[DigTriplet]) -> Vec<&DigTriplet> {
    let mut v: Vec<&DigTriplet> = triplets.iter().collect();
    v.sort_by(|a, b| (&a.query_id, &a.doc_id).cmp(&(&b.query_id, &b.doc_id)));
    v
}

/// Balanced CE pairs: label 1 above b1, label 0 below b2, the majority class
/// downsampled by seeded sampling without replacement. Triplets with
/// intermediate DIG never appear.
pub fn build_ce(triplets: &[DigTriplet], b1: f64, b2: f64, seed: u64) -> Result<Vec<CePair>> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for t in canonical(triplets) {
        if t.dig > b1 {
            positives.push(t);
        } else if t.dig < b2 {
            negatives.push(t);
        }
    }
    if positives.is_empty() {
        return Err(Error::InvalidInput("no triplets above b1: cannot build CE positives".into()));
    }
    if negatives.is_empty() {
        return Err(Error::InvalidInput("no triplets below b2: cannot build CE negatives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = positives.len().min(negatives.len());
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    positives.truncate(n);
    negatives.truncate(n);

    let mut pairs: Vec<CePair> = positives
        .iter()
        .map(|t| CePair { query_id: t.query_id.clone(), doc_id: t.doc_id.clone(), label: 1 })
        .chain(negatives.iter().map(|t| CePair {
            query_id: t.query_id.clone(),
            doc_id: t.doc_id.clone(),
            label: 0,
        }))
        .collect();
    pairs.sort_by(|a, b| (&a.query_id, &a.doc_id).cmp(&(&b.query_id, &b.doc_id)));
    Ok(pairs)
}

/// Margin groups: one group per query holding at least one positive, its
/// positives capped by highest DIG, and negatives drawn from the negative
/// pool first, then the negligible band.
pub fn build_margin(triplets: &[DigTriplet], params: &DatasetParams) -> Result<Vec<MarginGroup>> {
    params.validate()?;
    let mut by_query: BTreeMap<&str, Vec<&DigTriplet>> = BTreeMap::new();
    for t in canonical(triplets) {
        by_query.entry(&t.query_id).or_default().push(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut groups = Vec::new();
    for (query_id, docs) in by_query {
        let mut positives: Vec<&DigTriplet> =
            docs.iter().copied().filter(|t| t.dig > params.b1).collect();
        if positives.is_empty() {
            continue;
        }
        positives.sort_by(|a, b| {
            b.dig.partial_cmp(&a.dig).unwrap_or(std::cmp::Ordering::Equal).then(a.doc_id.cmp(&b.doc_id))
        });
        positives.truncate(params.max_positives);

        let mut negative_pool: Vec<&DigTriplet> =
            docs.iter().copied().filter(|t| t.dig < params.b2).collect();
        let mut negligible_pool: Vec<&DigTriplet> = docs
            .iter()
            .copied()
            .filter(|t| t.dig >= params.band.0 && t.dig <= params.band.1)
            .collect();
        negative_pool.shuffle(&mut rng);
        negligible_pool.shuffle(&mut rng);

        let target = params.neg_per_pos * positives.len();
        let mut negatives: Vec<&DigTriplet> = Vec::with_capacity(target);
        negatives.extend(negative_pool.into_iter().take(target));
        if negatives.len() < target {
            let remaining = target - negatives.len();
            negatives.extend(negligible_pool.into_iter().take(remaining));
        }
        if negatives.is_empty() {
            continue;
        }
        groups.push(MarginGroup {
            query_id: query_id.to_string(),
            positives: positives.iter().map(|t| t.doc_id.clone()).collect(),
            negatives: negatives.iter().map(|t| t.doc_id.clone()).collect(),
        });
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triplet(query: &str, doc: &str, dig: f64) -> DigTriplet {
        DigTriplet {
            query_id: query.into(),
            doc_id: doc.into(),
            answer: "a".into(),
            p_base: 0.3,
            p_aug: 0.3 + dig,
            dig,
            model_id: "mock".into(),
        }
    }

    #[test]
    fn ce_balances_by_downsampling() {
        let mut triplets = Vec::new();
        for i in 0..10 {
            triplets.push(triplet("q", &format!("pos{i:02}"), 0.6));
        }
        for i in 0..40 {
            triplets.push(triplet("q", &format!("neg{i:02}"), -0.3));
        }
        let pairs = build_ce(&triplets, 0.5, -0.2, 1).unwrap();
        assert_eq!(pairs.len(), 20);
        assert_eq!(pairs.iter().filter(|p| p.label == 1).count(), 10);
        assert_eq!(pairs.iter().filter(|p| p.label == 0).count(), 10);
    }

    #[test]
    fn ce_boundary_and_band_rules() {
        let triplets = vec![
            triplet("q", "d1", 0.6),  // included, label 1
            triplet("q", "d2", 0.1),  // intermediate: excluded
            triplet("q", "d3", -0.3), // included, label 0
        ];
        let pairs = build_ce(&triplets, 0.5, -0.2, 0).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().any(|p| p.doc_id == "d1" && p.label == 1));
        assert!(pairs.iter().any(|p| p.doc_id == "d3" && p.label == 0));
        assert!(!pairs.iter().any(|p| p.doc_id == "d2"));
    }

    #[test]
    fn ce_errors_without_both_classes() {
        assert!(build_ce(&[triplet("q", "d", 0.6)], 0.5, -0.2, 0).is_err());
        assert!(build_ce(&[triplet("q", "d", -0.6)], 0.5, -0.2, 0).is_err());
    }

    #[test]
    fn margin_caps_positives_at_five_highest() {
        let mut triplets: Vec<DigTriplet> =
            (0..7).map(|i| triplet("q", &format!("p{i}"), 0.51 + 0.01 * i as f64)).collect();
        triplets.push(triplet("q", "n0", -0.3));
        let groups = build_margin(&triplets, &DatasetParams::default()).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].positives.len(), 5);
        // highest dig docs are p6..p2
        assert!(groups[0].positives.contains(&"p6".to_string()));
        assert!(!groups[0].positives.contains(&"p0".to_string()));
    }

    #[test]
    fn margin_skips_queries_without_positives() {
        let triplets = vec![triplet("q", "n0", -0.4), triplet("q", "n1", 0.0)];
        assert!(build_margin(&triplets, &DatasetParams::default()).unwrap().is_empty());
    }

    #[test]
    fn margin_negligible_docs_fill_the_negative_quota() {
        let triplets = vec![
            triplet("q", "pos", 0.7),
            triplet("q", "neg", -0.3),
            triplet("q", "band", 0.01),
        ];
        let groups = build_margin(&triplets, &DatasetParams::default()).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].positives, vec!["pos".to_string()]);
        assert_eq!(groups[0].negatives.len(), 2);
        assert!(groups[0].negatives.contains(&"neg".to_string()));
        assert!(groups[0].negatives.contains(&"band".to_string()));
    }

    #[test]
    fn intermediate_dig_never_becomes_margin_negative() {
        // dig 0.1 sits between the band and b1: eligible nowhere.
        let triplets = vec![triplet("q", "pos", 0.7), triplet("q", "mid", 0.1)];
        assert!(build_margin(&triplets, &DatasetParams::default()).unwrap().is_empty());
    }

    #[test]
    fn builds_are_deterministic_and_input_order_free() {
        let mut triplets = Vec::new();
        for i in 0..20 {
            triplets.push(triplet(&format!("q{}", i % 4), &format!("p{i:02}"), 0.6));
            triplets.push(triplet(&format!("q{}", i % 4), &format!("n{i:02}"), -0.3));
        }
        let a_ce = build_ce(&triplets, 0.5, -0.2, 9).unwrap();
        let a_mg = build_margin(&triplets, &DatasetParams { seed: 9, ..DatasetParams::default() }).unwrap();
        triplets.reverse();
        let b_ce = build_ce(&triplets, 0.5, -0.2, 9).unwrap();
        let b_mg = build_margin(&triplets, &DatasetParams { seed: 9, ..DatasetParams::default() }).unwrap();
        assert_eq!(a_ce, b_ce);
        assert_eq!(a_mg, b_mg);
        // No doc appears on both sides of a group.
        for g in &a_mg {
            for p in &g.positives {
                assert!(!g.negatives.contains(p));
            }
        }
    }
}
