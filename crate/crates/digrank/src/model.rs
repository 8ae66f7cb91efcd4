//! The trainable scorer: a small feed-forward network with tanh hidden
//! layers over hashed lexical features. Forward passes are pure; training
//! mutates a single owned copy through [`crate::trainer`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{featurize, FeatureSpec};
use crate::losses::{self, LossConfig};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One dense layer, row-major weights of shape (outputs, inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub feature_spec: FeatureSpec,
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub seed: u64,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &ScorerModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                    inputs: l.inputs,
                    outputs: l.outputs,
                })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += scale * y;
            }
        }
    }
}

/// A CE training example: featurized pair plus its binary label.
#[derive(Debug, Clone)]
pub struct CeExample {
    pub features: Vec<f64>,
    pub label: u8,
}

/// A margin training group: featurized positives and negatives of one query.
#[derive(Debug, Clone)]
pub struct MarginExample {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LossBatch {
    pub ce: Vec<CeExample>,
    pub margin: Vec<MarginExample>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub ce: f64,
    pub margin: f64,
    pub total: f64,
    pub ce_clamped: usize,
}

impl ScorerModel {
    /// Seeded init: uniform weights scaled by fan-in, zero biases.
    pub fn new(feature_spec: FeatureSpec, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut layer_sizes = vec![feature_spec.dim()];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for w in layer_sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            if inputs == 0 || outputs == 0 {
                return Err(Error::InvalidConfig("layer sizes must be positive".into()));
            }
            let scale = 1.0 / (inputs as f64).sqrt();
            let weights = (0..inputs * outputs).map(|_| rng.gen_range(-scale..scale)).collect();
            layers.push(Layer { weights, biases: vec![0.0; outputs], inputs, outputs });
        }
        Ok(Self { feature_spec, layer_sizes, layers, seed })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Forward pass caching post-activation values per layer.
    fn forward_cached(&self, features: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
        if features.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "expected {} features, got {}",
                self.input_dim(),
                features.len()
            )));
        }
        let mut activations: Vec<Vec<f64>> = vec![features.to_vec()];
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = &activations[li];
            let last = li + 1 == self.layers.len();
            let mut out = Vec::with_capacity(layer.outputs);
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let z: f64 =
                    row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>() + layer.biases[o];
                out.push(if last { z } else { z.tanh() });
            }
            activations.push(out);
        }
        let raw = activations.last().unwrap()[0];
        if !raw.is_finite() {
            return Err(Error::NonFinite("scorer forward pass produced a non-finite value".into()));
        }
        Ok((activations, raw))
    }

    /// Raw score of a feature vector.
    pub fn raw_score(&self, features: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(features)?.1)
    }

    /// (raw score, logistic probability) for a (query, document) pair.
    pub fn score(&self, query: &str, doc: &str) -> Result<(f64, f64)> {
        let features = featurize(query, doc, &self.feature_spec);
        let raw = self.raw_score(&features)?;
        Ok((raw, losses::sigmoid(raw)))
    }

    /// Score many feature vectors; output order matches input order.
    pub fn raw_scores(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            batch.par_iter().map(|f| self.raw_score(f)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            batch.iter().map(|f| self.raw_score(f)).collect()
        }
    }

    /// Sequential counterpart of [`raw_scores`], kept for benchmarking.
    pub fn raw_scores_seq(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        batch.iter().map(|f| self.raw_score(f)).collect()
    }

    /// Backprop one item given dLoss/d(raw score); adds into `grads`.
    fn backprop_into(
        &self,
        activations: &[Vec<f64>],
        dscore: f64,
        grads: &mut Gradients,
    ) {
        // delta for the output layer (identity activation).
        let mut delta = vec![dscore];
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let prev = &activations[li];
            let g = &mut grads.layers[li];
            for o in 0..layer.outputs {
                g.biases[o] += delta[o];
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (i, a) in prev.iter().enumerate() {
                    row[i] += delta[o] * a;
                }
            }
            if li == 0 {
                break;
            }
            // delta for the previous (tanh) layer: (W^T delta) * (1 - a^2)
            let mut prev_delta = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for i in 0..layer.inputs {
                    prev_delta[i] += row[i] * delta[o];
                }
            }
            for (i, a) in activations[li].iter().enumerate() {
                prev_delta[i] *= 1.0 - a * a;
            }
            delta = prev_delta;
        }
    }

    /// Combined loss and exact analytic gradients over one mixed batch.
    ///
    /// The CE term is the mean over pairs; the margin term is the mean of
    /// per-group losses. Each side is scaled by its combination weight before
    /// accumulation, so the returned gradient is exactly that of the total.
    pub fn forward_backward(
        &self,
        batch: &LossBatch,
        cfg: &LossConfig,
    ) -> Result<(LossBreakdown, Gradients)> {
        cfg.validate()?;
        if batch.ce.is_empty() && batch.margin.is_empty() {
            return Err(Error::InvalidInput("forward_backward on an empty batch".into()));
        }
        if batch.ce.is_empty() && cfg.beta > 0.0 {
            return Err(Error::InvalidInput("CE batch empty but beta > 0".into()));
        }
        if batch.margin.is_empty() && cfg.beta < 1.0 {
            return Err(Error::InvalidInput("margin batch empty but beta < 1".into()));
        }

        let mut grads = Gradients::zeros_like(self);
        let mut ce_sum = 0.0;
        let mut ce_clamped = 0usize;

        // CE side.
        if !batch.ce.is_empty() {
            let n = batch.ce.len() as f64;
            let cached: Vec<(Vec<Vec<f64>>, f64)> = {
                #[cfg(feature = "parallel")]
                {
                    batch.ce.par_iter().map(|ex| self.forward_cached(&ex.features)).collect::<Result<_>>()?
                }
                #[cfg(not(feature = "parallel"))]
                {
                    batch.ce.iter().map(|ex| self.forward_cached(&ex.features)).collect::<Result<_>>()?
                }
            };
            for (ex, (acts, raw)) in batch.ce.iter().zip(&cached) {
                let p = losses::sigmoid(*raw);
                let q = p.clamp(1e-12, 1.0 - 1e-12);
                if p != q {
                    ce_clamped += 1;
                }
                ce_sum += if ex.label == 1 { -q.ln() } else { -(1.0 - q).ln() };
                // d(mean BCE)/d(raw) = (p - y) / N, scaled by beta.
                let dscore = cfg.beta * (p - ex.label as f64) / n;
                if dscore != 0.0 {
                    self.backprop_into(acts, dscore, &mut grads);
                }
            }
            ce_sum /= n;
        }

        // Margin side.
        let mut margin_sum = 0.0;
        if !batch.margin.is_empty() {
            let g = batch.margin.len() as f64;
            for group in &batch.margin {
                if group.positives.is_empty() || group.negatives.is_empty() {
                    return Err(Error::InvalidInput(
                        "margin group needs at least one positive and one negative".into(),
                    ));
                }
                let pos_cached: Vec<(Vec<Vec<f64>>, f64)> =
                    group.positives.iter().map(|f| self.forward_cached(f)).collect::<Result<_>>()?;
                let neg_cached: Vec<(Vec<Vec<f64>>, f64)> =
                    group.negatives.iter().map(|f| self.forward_cached(f)).collect::<Result<_>>()?;
                let s_p: Vec<f64> = pos_cached.iter().map(|(_, s)| *s).collect();
                let s_n: Vec<f64> = neg_cached.iter().map(|(_, s)| *s).collect();
                let (loss, grad_p, grad_n) = losses::margin_loss_grad(&s_p, &s_n, cfg.gamma)?;
                margin_sum += loss;
                let scale = (1.0 - cfg.beta) / g;
                for ((acts, _), dp) in pos_cached.iter().zip(&grad_p) {
                    let d = scale * dp;
                    if d != 0.0 {
                        self.backprop_into(acts, d, &mut grads);
                    }
                }
                for ((acts, _), dn) in neg_cached.iter().zip(&grad_n) {
                    let d = scale * dn;
                    if d != 0.0 {
                        self.backprop_into(acts, d, &mut grads);
                    }
                }
            }
            margin_sum /= g;
        }

        let total = losses::total_loss(ce_sum, margin_sum, cfg.beta);
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("loss is not finite: {total}")));
        }
        Ok((LossBreakdown { ce: ce_sum, margin: margin_sum, total, ce_clamped }, grads))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flat view of all parameters, used by the optimizer and by tests.
    pub fn get_param(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in &self.layers {
            if i < l.weights.len() {
                return l.weights[i];
            }
            i -= l.weights.len();
            if i < l.biases.len() {
                return l.biases[i];
            }
            i -= l.biases.len();
        }
        panic!("parameter index {idx} out of range");
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for l in &mut self.layers {
            if i < l.weights.len() {
                l.weights[i] = value;
                return;
            }
            i -= l.weights.len();
            if i < l.biases.len() {
                l.biases[i] = value;
                return;
            }
            i -= l.biases.len();
        }
        panic!("parameter index {idx} out of range");
    }
}

impl Gradients {
    pub fn get(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in &self.layers {
            if i < l.weights.len() {
                return l.weights[i];
            }
            i -= l.weights.len();
            if i < l.biases.len() {
                return l.biases[i];
            }
            i -= l.biases.len();
        }
        panic!("gradient index {idx} out of range");
    }
}
