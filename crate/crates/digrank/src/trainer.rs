//! Adam training over the mixed CE/margin objective, plus ranking
//! validation metrics. The loop is sequential and deterministic under a
//! fixed seed; only per-item forward/backward work is parallelized, and the
//! results are merged in a fixed order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::model::{CeExample, Gradients, LossBatch, MarginExample, ScorerModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub ce_batch_size: usize,
    pub margin_batch_size: usize,
    pub seed: u64,
    pub loss: LossConfig,
    /// Steps between checkpoint callbacks; 0 disables intermediate checkpoints.
    pub checkpoint_interval: usize,
    /// Early-stop patience in validation rounds; 0 disables early stopping.
    pub patience: usize,
    /// Steps between validation rounds when a validation set is supplied.
    pub eval_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 20,
            ce_batch_size: 32,
            margin_batch_size: 8,
            seed: 0,
            loss: LossConfig::default(),
            checkpoint_interval: 0,
            patience: 0,
            eval_interval: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.ce_batch_size == 0 || self.margin_batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch sizes must be positive".into()));
        }
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub ce: f64,
    pub margin: f64,
    pub total: f64,
}

/// Adam optimizer state, parameter-shaped.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &ScorerModel, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            epsilon: cfg.adam_epsilon,
            t: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    pub fn step(&mut self, model: &mut ScorerModel, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (li, layer) in model.layers.iter_mut().enumerate() {
            let gm = &mut self.m.layers[li];
            let gv = &mut self.v.layers[li];
            let gl = &grads.layers[li];
            for (i, w) in layer.weights.iter_mut().enumerate() {
                let g = gl.weights[i];
                gm.weights[i] = self.beta1 * gm.weights[i] + (1.0 - self.beta1) * g;
                gv.weights[i] = self.beta2 * gv.weights[i] + (1.0 - self.beta2) * g * g;
                let m_hat = gm.weights[i] / bc1;
                let v_hat = gv.weights[i] / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            for (i, b) in layer.biases.iter_mut().enumerate() {
                let g = gl.biases[i];
                gm.biases[i] = self.beta1 * gm.biases[i] + (1.0 - self.beta1) * g;
                gv.biases[i] = self.beta2 * gv.biases[i] + (1.0 - self.beta2) * g * g;
                let m_hat = gm.biases[i] / bc1;
                let v_hat = gv.biases[i] / bc2;
                *b -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Cycles shuffled indices; reshuffles whenever the list is exhausted.
struct BatchCycler {
    order: Vec<usize>,
    cursor: usize,
}

impl BatchCycler {
    fn new(len: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        Self { order, cursor: 0 }
    }

    fn next_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(size.min(self.order.len()));
        if self.order.is_empty() {
            return out;
        }
        for _ in 0..size.min(self.order.len()) {
            if self.cursor == self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// A validation group: featurized docs with their DIG scores.
#[derive(Debug, Clone)]
pub struct RankGroup {
    pub docs: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RankingMetrics {
    pub auc: f64,
    pub kendall_tau: f64,
    pub pairwise_accuracy: f64,
}

/// Ranking quality of a model against DIG ground truth.
///
/// `pairwise_accuracy` is the within-group fraction of (positive, negative)
/// pairs — positives above b1, negatives at or below b2 or in between —
/// scored in the right order, ties counting one half. `kendall_tau` compares
/// the score ordering with the DIG ordering over all in-group doc pairs with
/// distinct DIG. `auc` is the pooled Mann-Whitney statistic across groups.
pub fn evaluate_ranking(
    model: &ScorerModel,
    groups: &[RankGroup],
    b1: f64,
    b2: f64,
) -> Result<RankingMetrics> {
    if groups.is_empty() {
        return Err(Error::InvalidInput("evaluate_ranking on empty group list".into()));
    }
    let mut pair_hits = 0.0;
    let mut pair_total = 0.0;
    let mut concordant = 0.0;
    let mut tau_total = 0.0;
    let mut pooled_pos: Vec<f64> = Vec::new();
    let mut pooled_neg: Vec<f64> = Vec::new();

    for group in groups {
        let scores = model.raw_scores(&group.docs.iter().map(|(f, _)| f.clone()).collect::<Vec<_>>())?;
        let digs: Vec<f64> = group.docs.iter().map(|(_, d)| *d).collect();
        for i in 0..digs.len() {
            if digs[i] > b1 {
                pooled_pos.push(scores[i]);
            } else if digs[i] < b2 {
                pooled_neg.push(scores[i]);
            }
            for j in (i + 1)..digs.len() {
                if digs[i] != digs[j] {
                    tau_total += 1.0;
                    let dig_gt = digs[i] > digs[j];
                    if scores[i] == scores[j] {
                        // tie: contributes zero to concordant-discordant
                    } else if (scores[i] > scores[j]) == dig_gt {
                        concordant += 1.0;
                    } else {
                        concordant -= 1.0;
                    }
                }
                let pos_neg = (digs[i] > b1 && digs[j] <= b1) || (digs[j] > b1 && digs[i] <= b1);
                if pos_neg {
                    pair_total += 1.0;
                    let (sp, sn) = if digs[i] > b1 { (scores[i], scores[j]) } else { (scores[j], scores[i]) };
                    if sp > sn {
                        pair_hits += 1.0;
                    } else if sp == sn {
                        pair_hits += 0.5;
                    }
                }
            }
        }
    }
    let pairwise_accuracy = if pair_total > 0.0 { pair_hits / pair_total } else { 0.0 };
    let kendall_tau = if tau_total > 0.0 { concordant / tau_total } else { 0.0 };
    let mut auc_hits = 0.0;
    for &p in &pooled_pos {
        for &n in &pooled_neg {
            if p > n {
                auc_hits += 1.0;
            } else if p == n {
                auc_hits += 0.5;
            }
        }
    }
    let auc = if pooled_pos.is_empty() || pooled_neg.is_empty() {
        0.0
    } else {
        auc_hits / (pooled_pos.len() * pooled_neg.len()) as f64
    };
    Ok(RankingMetrics { auc, kendall_tau, pairwise_accuracy })
}

/// Trains the model in place. Every step draws one CE batch and one margin
/// batch, computes the combined loss, and applies a single Adam update.
/// Divergence aborts with the offending step in the error.
pub fn train(
    model: &mut ScorerModel,
    ce_set: &[CeExample],
    margin_set: &[MarginExample],
    validation: Option<&[RankGroup]>,
    config: &TrainConfig,
    mut on_step: impl FnMut(&StepMetrics, &ScorerModel),
) -> Result<Vec<StepMetrics>> {
    config.validate()?;
    let beta = config.loss.beta;
    if ce_set.is_empty() && beta > 0.0 {
        return Err(Error::InvalidInput("CE set empty but beta > 0".into()));
    }
    if margin_set.is_empty() && beta < 1.0 {
        return Err(Error::InvalidInput("margin set empty but beta < 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ce_cycler = BatchCycler::new(ce_set.len(), &mut rng);
    let mut margin_cycler = BatchCycler::new(margin_set.len(), &mut rng);

    let ce_steps = if ce_set.is_empty() { 0 } else { ce_set.len().div_ceil(config.ce_batch_size) };
    let margin_steps =
        if margin_set.is_empty() { 0 } else { margin_set.len().div_ceil(config.margin_batch_size) };
    let steps_per_epoch = ce_steps.max(margin_steps).max(1);
    let total_steps = steps_per_epoch * config.epochs;

    let mut adam = Adam::new(model, config);
    let mut log = Vec::with_capacity(total_steps);
    let mut best_val = f64::NEG_INFINITY;
    let mut bad_rounds = 0usize;

    for step in 0..total_steps {
        let ce_idx = if beta > 0.0 { ce_cycler.next_batch(config.ce_batch_size, &mut rng) } else { vec![] };
        let margin_idx =
            if beta < 1.0 { margin_cycler.next_batch(config.margin_batch_size, &mut rng) } else { vec![] };
        let batch = LossBatch {
            ce: ce_idx.iter().map(|&i| ce_set[i].clone()).collect(),
            margin: margin_idx.iter().map(|&i| margin_set[i].clone()).collect(),
        };
        let (breakdown, grads) = model.forward_backward(&batch, &config.loss).map_err(|e| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("step {step}: {msg}")),
            other => other,
        })?;
        adam.step(model, &grads);

        let metrics =
            StepMetrics { step, ce: breakdown.ce, margin: breakdown.margin, total: breakdown.total };
        on_step(&metrics, model);
        log.push(metrics);

        if config.checkpoint_interval > 0 && (step + 1) % config.checkpoint_interval == 0 {
            // callback already sees the model each step; interval hook kept
            // for parity with the CLI which persists on this cadence
        }

        if let (Some(val), true) = (validation, config.patience > 0) {
            if (step + 1) % config.eval_interval.max(1) == 0 {
                let m = evaluate_ranking(model, val, config.loss.b1, config.loss.b2)?;
                if m.pairwise_accuracy > best_val + 1e-12 {
                    best_val = m.pairwise_accuracy;
                    bad_rounds = 0;
                } else {
                    bad_rounds += 1;
                    if bad_rounds >= config.patience {
                        break;
                    }
                }
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSpec;
    use crate::losses::sigmoid;

    fn tiny_spec() -> FeatureSpec {
        FeatureSpec { query_buckets: 2, doc_buckets: 1, overlap_buckets: 0, max_ngram: 1, lowercase_strip_punct: true }
    }

    #[test]
    fn adam_matches_hand_rolled_oracle() {
        // Single linear layer, 3 weights + 1 bias.
        let spec = tiny_spec();
        let mut model = ScorerModel::new(spec, &[], 0).unwrap();
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(&model, &cfg);

        // Oracle state over the 4 flat parameters.
        let mut params: Vec<f64> = (0..4).map(|i| model.get_param(i)).collect();
        let mut m = vec![0.0; 4];
        let mut v = vec![0.0; 4];
        let grad_seq = [
            vec![0.1, -0.2, 0.3, 0.05],
            vec![-0.4, 0.1, 0.0, 0.2],
            vec![0.25, 0.25, -0.5, -0.1],
        ];
        for (t, g) in grad_seq.iter().enumerate() {
            let mut grads = Gradients::zeros_like(&model);
            grads.layers[0].weights.copy_from_slice(&g[..3]);
            grads.layers[0].biases[0] = g[3];
            adam.step(&mut model, &grads);

            let tt = (t + 1) as i32;
            for i in 0..4 {
                m[i] = 0.9 * m[i] + 0.1 * g[i];
                v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
                let m_hat = m[i] / (1.0 - 0.9_f64.powi(tt));
                let v_hat = v[i] / (1.0 - 0.999_f64.powi(tt));
                params[i] -= 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
            }
            for i in 0..4 {
                assert!(
                    (model.get_param(i) - params[i]).abs() < 1e-10,
                    "param {i} after step {tt}: {} vs {}",
                    model.get_param(i),
                    params[i]
                );
            }
        }
    }

    fn separable_ce(n: usize) -> Vec<CeExample> {
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let features = if label == 1 { vec![1.0, 0.0, 0.3] } else { vec![0.0, 1.0, 0.3] };
                CeExample { features, label }
            })
            .collect()
    }

    #[test]
    fn ce_only_training_learns_separable_data() {
        let mut model = ScorerModel::new(tiny_spec(), &[4], 1).unwrap();
        let ce = separable_ce(64);
        let config = TrainConfig {
            epochs: 60,
            ce_batch_size: 16,
            loss: LossConfig { beta: 1.0, ..LossConfig::default() },
            ..TrainConfig::default()
        };
        let log = train(&mut model, &ce, &[], None, &config, |_, _| {}).unwrap();
        assert!(log.last().unwrap().total < log.first().unwrap().total);
        let correct = ce
            .iter()
            .filter(|ex| {
                let p = sigmoid(model.raw_score(&ex.features).unwrap());
                (p > 0.5) == (ex.label == 1)
            })
            .count();
        assert!(correct as f64 / ce.len() as f64 > 0.95);
    }

    #[test]
    fn same_seed_gives_bit_identical_models() {
        let ce = separable_ce(32);
        let margin = vec![MarginExample {
            positives: vec![vec![1.0, 0.0, 0.2]],
            negatives: vec![vec![0.0, 1.0, 0.2], vec![0.1, 0.8, 0.2]],
        }];
        let config = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let run = || {
            let mut model = ScorerModel::new(tiny_spec(), &[4], 7).unwrap();
            train(&mut model, &ce, &margin, None, &config, |_, _| {}).unwrap();
            serde_json::to_string(&model).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_sets_rejected_unless_masked() {
        let mut model = ScorerModel::new(tiny_spec(), &[], 0).unwrap();
        let config = TrainConfig::default(); // beta = 0.75
        assert!(train(&mut model, &[], &[], None, &config, |_, _| {}).is_err());
        let ce = separable_ce(8);
        assert!(train(&mut model, &ce, &[], None, &config, |_, _| {}).is_err());
        let config1 = TrainConfig {
            loss: LossConfig { beta: 1.0, ..LossConfig::default() },
            epochs: 1,
            ..TrainConfig::default()
        };
        assert!(train(&mut model, &ce, &[], None, &config1, |_, _| {}).is_ok());
    }

    #[test]
    fn ranking_metrics_on_perfect_and_constant_models() {
        let spec = tiny_spec();
        let mut perfect = ScorerModel::new(spec.clone(), &[], 0).unwrap();
        // score = f0 - f1
        perfect.layers[0].weights.copy_from_slice(&[1.0, -1.0, 0.0]);
        perfect.layers[0].biases[0] = 0.0;
        let groups = vec![RankGroup {
            docs: vec![
                (vec![1.0, 0.0, 0.0], 0.7),
                (vec![0.5, 0.5, 0.0], 0.0),
                (vec![0.0, 1.0, 0.0], -0.4),
            ],
        }];
        let m = evaluate_ranking(&perfect, &groups, 0.5, -0.2).unwrap();
        assert_eq!(m.pairwise_accuracy, 1.0);
        assert_eq!(m.kendall_tau, 1.0);
        assert_eq!(m.auc, 1.0);

        let mut constant = ScorerModel::new(spec, &[], 0).unwrap();
        constant.layers[0].weights.iter_mut().for_each(|w| *w = 0.0);
        let m = evaluate_ranking(&constant, &groups, 0.5, -0.2).unwrap();
        assert_eq!(m.pairwise_accuracy, 0.5);
        assert_eq!(m.kendall_tau, 0.0);
        assert_eq!(m.auc, 0.5);
    }

    #[test]
    fn pairwise_accuracy_matches_exhaustive_pair_count() {
        // Golden fixture checked against a by-hand enumeration of the pairs.
        let spec = tiny_spec();
        let mut model = ScorerModel::new(spec, &[], 0).unwrap();
        model.layers[0].weights.copy_from_slice(&[1.0, 0.0, 0.0]);
        model.layers[0].biases[0] = 0.0;
        // scores equal f0: docs score 0.9, 0.1, 0.5
        let groups = vec![RankGroup {
            docs: vec![
                (vec![0.9, 0.0, 0.0], 0.6),  // positive
                (vec![0.1, 0.0, 0.0], -0.3), // negative, scored below: hit
                (vec![0.5, 0.0, 0.0], 0.0),  // negative side of the b1 split
            ],
        }];
        // pairs against the positive: (pos, -0.3) hit, (pos, 0.0) hit => 2/2
        let m = evaluate_ranking(&model, &groups, 0.5, -0.2).unwrap();
        assert_eq!(m.pairwise_accuracy, 1.0);
        // flip the model so the positive scores lowest: 0/2
        model.layers[0].weights[0] = -1.0;
        let m = evaluate_ranking(&model, &groups, 0.5, -0.2).unwrap();
        assert_eq!(m.pairwise_accuracy, 0.0);
    }

    #[test]
    fn divergence_reports_offending_step() {
        let mut model = ScorerModel::new(tiny_spec(), &[], 0).unwrap();
        model.layers[0].weights[0] = f64::MAX;
        let ce = vec![CeExample { features: vec![f64::MAX, 0.0, 0.0], label: 1 }];
        let config = TrainConfig {
            loss: LossConfig { beta: 1.0, ..LossConfig::default() },
            epochs: 1,
            ..TrainConfig::default()
        };
        let err = train(&mut model, &ce, &[], None, &config, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert!(err.to_string().contains("step 0"));
    }
}
