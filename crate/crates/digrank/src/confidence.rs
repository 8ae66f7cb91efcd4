//! Answer generation confidence from per-token probabilities: sliding-window
//! smoothing followed by an importance-weighted product over the smoothed
//! sequence. The product is accumulated in log space so long answers do not
//! underflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::TokenProbSequence;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceParams {
    /// Sliding window size; must be odd.
    pub window: usize,
    /// Number of leading tokens that receive the head weight.
    pub head_len: usize,
    /// Importance weight applied uniformly to the first `head_len` tokens.
    pub head_weight: f64,
    /// Balance between head and tail exponents, in (0,1).
    pub alpha: f64,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        Self { window: 3, head_len: 3, head_weight: 0.8, alpha: 0.6 }
    }
}

impl ConfidenceParams {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::InvalidConfig(format!("window must be odd and >= 1, got {}", self.window)));
        }
        if self.head_len == 0 {
            return Err(Error::InvalidConfig("head_len must be >= 1".into()));
        }
        if self.head_weight <= 0.0 {
            return Err(Error::InvalidConfig(format!("head_weight must be positive, got {}", self.head_weight)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Mean over a window of radius `window/2` centered at each position,
/// truncated at the sequence boundaries with the divisor equal to the number
/// of values actually inside the window.
pub fn smooth(probs: &[f64], window: usize) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidInput("smooth of empty sequence".into()));
    }
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidInput(format!("window must be odd and >= 1, got {window}")));
    }
    let radius = window / 2;
    let n = probs.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(radius);
        let hi = usize::min(i + radius, n - 1);
        let slice = &probs[lo..=hi];
        out.push(slice.iter().sum::<f64>() / slice.len() as f64);
    }
    Ok(out)
}

/// Weighted generation confidence over a token probability sequence.
///
/// The first `min(head_len, n)` smoothed probabilities carry exponent
/// `head_weight * alpha`; the rest carry `1 - alpha`. For sequences no longer
/// than `head_len` the tail product is empty and contributes a factor of 1.
pub fn estimate_confidence(seq: &TokenProbSequence, params: &ConfidenceParams) -> Result<f64> {
    params.validate()?;
    seq.validate()?;
    let smoothed = smooth(&seq.probs, params.window)?;
    let k = usize::min(params.head_len, smoothed.len());
    let head_exp = params.head_weight * params.alpha;
    let tail_exp = 1.0 - params.alpha;
    let mut log_conf = 0.0;
    for (i, &p) in smoothed.iter().enumerate() {
        let e = if i < k { head_exp } else { tail_exp };
        log_conf += e * p.ln();
    }
    Ok(log_conf.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn seq(probs: Vec<f64>) -> TokenProbSequence {
        TokenProbSequence {
            tokens: probs.iter().map(|_| "t".to_string()).collect(),
            probs,
        }
    }

    #[test]
    fn smooth_constant_sequence_is_fixed_point() {
        assert_eq!(smooth(&[0.3, 0.3, 0.3], 3).unwrap(), vec![0.3, 0.3, 0.3]);
    }

    #[test]
    fn smooth_hand_computed_ramp() {
        let out = smooth(&[0.2, 0.4, 0.6], 3).unwrap();
        assert_relative_eq!(out[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.4, epsilon = 1e-15);
        assert_relative_eq!(out[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn smooth_window_one_is_identity() {
        let probs = vec![0.1, 0.9, 0.4, 0.7];
        assert_eq!(smooth(&probs, 1).unwrap(), probs);
    }

    #[test]
    fn smooth_rejects_empty_and_even_window() {
        assert!(smooth(&[], 3).is_err());
        assert!(smooth(&[0.5], 2).is_err());
    }

    #[test]
    fn confidence_all_ones_is_one() {
        let c = estimate_confidence(&seq(vec![1.0; 7]), &ConfidenceParams::default()).unwrap();
        assert_relative_eq!(c, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn confidence_hand_computed_constant_half() {
        // Four tokens at 0.5 with defaults: exponent 3*0.8*0.6 + 1*0.4 = 1.84.
        let c = estimate_confidence(&seq(vec![0.5; 4]), &ConfidenceParams::default()).unwrap();
        assert_relative_eq!(c, 0.5_f64.powf(1.84), epsilon = 1e-12);
    }

    #[test]
    fn confidence_short_sequence_uses_head_exponent_only() {
        // Two tokens at 0.5, head_len 3: confidence = 0.5^(2 * 0.48).
        let c = estimate_confidence(&seq(vec![0.5; 2]), &ConfidenceParams::default()).unwrap();
        assert_relative_eq!(c, 0.5_f64.powf(2.0 * 0.48), epsilon = 1e-12);
    }

    #[test]
    fn confidence_rejects_bad_params() {
        let mut p = ConfidenceParams::default();
        p.alpha = 1.0;
        assert!(estimate_confidence(&seq(vec![0.5]), &p).is_err());
        let mut p = ConfidenceParams::default();
        p.window = 4;
        assert!(estimate_confidence(&seq(vec![0.5]), &p).is_err());
    }

    proptest! {
        #[test]
        fn smooth_stays_within_input_range(
            probs in prop::collection::vec(0.01_f64..1.0, 1..30),
            half in 0_usize..4,
        ) {
            let window = 2 * half + 1;
            let out = smooth(&probs, window).unwrap();
            prop_assert_eq!(out.len(), probs.len());
            let lo = probs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in out {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn confidence_in_unit_interval_and_monotone(
            probs in prop::collection::vec(0.01_f64..=1.0, 1..20),
            idx in 0_usize..20,
        ) {
            let params = ConfidenceParams::default();
            let base = estimate_confidence(&seq(probs.clone()), &params).unwrap();
            prop_assert!(base > 0.0 && base <= 1.0 + 1e-12);
            // Raising any single token probability never lowers the confidence.
            let i = idx % probs.len();
            let mut bumped = probs.clone();
            bumped[i] = (bumped[i] + 0.05).min(1.0);
            let after = estimate_confidence(&seq(bumped), &params).unwrap();
            prop_assert!(after >= base - 1e-12);
        }
    }
}
