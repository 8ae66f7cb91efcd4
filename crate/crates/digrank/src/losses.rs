//! Loss functions for the multi-task reranker: binary cross-entropy over
//! labeled pairs, a LogSumExp-smoothed margin loss over ranked groups, and
//! their convex combination.
//!
//! All exp/log arithmetic is max-shifted so scores of any magnitude are safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyper-parameters of the combined training objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Weight of the CE term; the margin term gets `1 - beta`.
    pub beta: f64,
    /// Scaling factor inside the margin loss exponentials.
    pub gamma: f64,
    /// Upper DIG decision boundary (label 1 above it).
    pub b1: f64,
    /// Lower DIG decision boundary (label 0 below it).
    pub b2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { beta: 0.75, gamma: 2.0, b1: 0.5, b2: -0.2 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!("beta must be in [0,1], got {}", self.beta)));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.b2 >= self.b1 {
            return Err(Error::InvalidConfig(format!("b2 ({}) must be below b1 ({})", self.b2, self.b1)));
        }
        Ok(())
    }
}

/// log(sum(exp(x_i))), max-shifted for stability.
pub fn lse(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("lse of empty list".into()));
    }
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    Ok(m + sum.ln())
}

/// log(1 + e^x) without overflow for large |x|.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Group margin loss: log(1 + sum_{i,j} exp(gamma * (s_n[j] - s_p[i]))).
///
/// Computed as softplus(LSE(gamma*s_n) + LSE(-gamma*s_p)), which is the same
/// double sum after factoring the product of exponential sums.
pub fn margin_loss(s_p: &[f64], s_n: &[f64], gamma: f64) -> Result<f64> {
    if s_p.is_empty() {
        return Err(Error::InvalidInput("margin loss needs at least one positive score".into()));
    }
    if s_n.is_empty() {
        return Err(Error::InvalidInput("margin loss needs at least one negative score".into()));
    }
    let a = lse(&s_n.iter().map(|s| gamma * s).collect::<Vec<_>>())?;
    let b = lse(&s_p.iter().map(|s| -gamma * s).collect::<Vec<_>>())?;
    Ok(softplus(a + b))
}

/// Gradient of [`margin_loss`] with respect to each positive and negative score.
///
/// With z = LSE(gamma*s_n) + LSE(-gamma*s_p) the loss is softplus(z), so
/// d/ds_n[j] = sigmoid(z) * gamma * softmax(gamma*s_n)[j] and the positive
/// side is the mirror image with a minus sign.
pub fn margin_loss_grad(s_p: &[f64], s_n: &[f64], gamma: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let gn: Vec<f64> = s_n.iter().map(|s| gamma * s).collect();
    let gp: Vec<f64> = s_p.iter().map(|s| -gamma * s).collect();
    let a = lse(&gn)?;
    let b = lse(&gp)?;
    let z = a + b;
    let loss = softplus(z);
    let sig = sigmoid(z);
    let grad_n: Vec<f64> = gn.iter().map(|&x| sig * gamma * (x - a).exp()).collect();
    let grad_p: Vec<f64> = gp.iter().map(|&x| -sig * gamma * (x - b).exp()).collect();
    Ok((loss, grad_p, grad_n))
}

/// Mean binary cross-entropy. Probabilities are clamped to
/// [1e-12, 1-1e-12]; the returned count says how many inputs needed it.
pub fn ce_loss(probs: &[f64], labels: &[u8]) -> Result<(f64, usize)> {
    if probs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "ce_loss got {} probs and {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::InvalidInput("ce_loss of empty batch".into()));
    }
    let mut clamped = 0usize;
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        let mut q = p;
        if q < 1e-12 || q > 1.0 - 1e-12 {
            q = q.clamp(1e-12, 1.0 - 1e-12);
            clamped += 1;
        }
        total += if y == 1 { -q.ln() } else { -(1.0 - q).ln() };
    }
    Ok((total / probs.len() as f64, clamped))
}

/// Convex combination of the two task losses.
pub fn total_loss(ce: f64, margin: f64, beta: f64) -> f64 {
    beta * ce + (1.0 - beta) * margin
}
