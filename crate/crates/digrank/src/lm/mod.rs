//! Provider boundary for teacher-forced scoring and one-shot generation.
//!
//! Both the deterministic mock and the remote HTTP client expose the same
//! trait: given a prompt and a fixed answer continuation, return the model's
//! per-token probability of that continuation.

pub mod http;
pub mod mock;
pub mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::HttpLm;
pub use mock::{MockLm, MockLmSpec};

/// A request to score a fixed answer continuation under a prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmRequest {
    pub prompt_text: String,
    pub answer_text: String,
    pub model_id: String,
}

impl LmRequest {
    pub fn validate(&self) -> Result<()> {
        if self.answer_text.is_empty() {
            return Err(Error::InvalidInput("answer_text must be non-empty".into()));
        }
        Ok(())
    }
}

/// Per-token probabilities of a teacher-forced continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProbSequence {
    pub tokens: Vec<String>,
    pub probs: Vec<f64>,
}

impl TokenProbSequence {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidInput("token sequence must be non-empty".into()));
        }
        if self.tokens.len() != self.probs.len() {
            return Err(Error::Dimension(format!(
                "{} tokens but {} probabilities",
                self.tokens.len(),
                self.probs.len()
            )));
        }
        for &p in &self.probs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidInput(format!("token probability {p} outside (0,1]")));
            }
        }
        Ok(())
    }
}

/// A confidence provider. Implementations are read-only after construction
/// and safe to share across threads.
pub trait LmProvider: Send + Sync {
    /// Probability of each answer token given the prompt plus all preceding
    /// answer tokens.
    fn score_continuation(&self, req: &LmRequest) -> Result<TokenProbSequence>;

    /// Single free-form generation call for final answer production.
    fn generate(&self, prompt: &str, model_id: &str) -> Result<String>;
}

impl<T: LmProvider + ?Sized> LmProvider for Box<T> {
    fn score_continuation(&self, req: &LmRequest) -> Result<TokenProbSequence> {
        (**self).score_continuation(req)
    }
    fn generate(&self, prompt: &str, model_id: &str) -> Result<String> {
        (**self).generate(prompt, model_id)
    }
}

impl<T: LmProvider + ?Sized> LmProvider for Arc<T> {
    fn score_continuation(&self, req: &LmRequest) -> Result<TokenProbSequence> {
        (**self).score_continuation(req)
    }
    fn generate(&self, prompt: &str, model_id: &str) -> Result<String> {
        (**self).generate(prompt, model_id)
    }
}

/// Wrapper that counts provider calls; used for pipeline accounting.
pub struct CountingProvider<P> {
    inner: P,
    score_calls: AtomicUsize,
    generate_calls: AtomicUsize,
}

impl<P: LmProvider> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, score_calls: AtomicUsize::new(0), generate_calls: AtomicUsize::new(0) }
    }

    pub fn score_calls(&self) -> usize {
        self.score_calls.load(Ordering::SeqCst)
    }

    pub fn generate_calls(&self) -> usize {
        self.generate_calls.load(Ordering::SeqCst)
    }
}

impl<P: LmProvider> LmProvider for CountingProvider<P> {
    fn score_continuation(&self, req: &LmRequest) -> Result<TokenProbSequence> {
        self.score_calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score_continuation(req)
    }
    fn generate(&self, prompt: &str, model_id: &str) -> Result<String> {
        self.generate_calls.fetch_add(1, Ordering::SeqCst);
        self.inner.generate(prompt, model_id)
    }
}
