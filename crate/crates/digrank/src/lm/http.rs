//! Remote completion client. Teacher forcing is done by echoing the
//! prompt+answer concatenation with zero new tokens and slicing the answer
//! span out of the returned per-token logprobs.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{LmProvider, LmRequest, TokenProbSequence};
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "DIGRANK_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpLmConfig {
    pub endpoint: String,
    pub max_retries: u32,
    /// Initial backoff; doubled after every failed attempt.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_answer_tokens: u32,
}

impl Default for HttpLmConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/completions".to_string(),
            max_retries: 3,
            backoff_ms: 200,
            timeout_secs: 60,
            max_answer_tokens: 64,
        }
    }
}

pub struct HttpLm {
    config: HttpLmConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: Option<String>,
    logprobs: Option<Logprobs>,
}

#[derive(Deserialize)]
struct Logprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    text_offset: Vec<usize>,
}

impl HttpLm {
    pub fn new(config: HttpLmConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let api_key = std::env::var(API_KEY_ENV).ok();
        Ok(Self { config, client, api_key })
    }

    fn post(&self, body: serde_json::Value) -> Result<String> {
        let mut backoff = self.config.backoff_ms;
        let mut last_err = None;
        for _ in 0..=self.config.max_retries {
            let mut req = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send().and_then(|r| r.error_for_status()).and_then(|r| r.text()) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    last_err = Some(e.to_string());
                    std::thread::sleep(Duration::from_millis(backoff));
                    backoff = backoff.saturating_mul(2);
                }
            }
        }
        Err(Error::Transport(last_err.unwrap_or_else(|| "no attempt made".into())))
    }
}

/// Pull the answer-span token probabilities out of an echoed completion body.
///
/// `prompt_len` is the byte length of the prompt part; tokens whose text
/// offset falls at or beyond it belong to the answer.
pub fn parse_echoed_logprobs(body: &str, prompt_len: usize) -> Result<TokenProbSequence> {
    let parsed: CompletionResponse =
        serde_json::from_str(body).map_err(|e| Error::MalformedResponse(e.to_string()))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| Error::MalformedResponse("response has no choices".into()))?;
    let lp = choice.logprobs.ok_or(Error::MissingLogprobs)?;
    if lp.tokens.len() != lp.token_logprobs.len() || lp.tokens.len() != lp.text_offset.len() {
        return Err(Error::MalformedResponse("logprob arrays have unequal lengths".into()));
    }
    let mut tokens = Vec::new();
    let mut probs = Vec::new();
    for ((tok, lprob), offset) in lp.tokens.into_iter().zip(lp.token_logprobs).zip(lp.text_offset) {
        if offset < prompt_len {
            continue;
        }
        let lprob = lprob.ok_or(Error::MissingLogprobs)?;
        tokens.push(tok);
        probs.push(lprob.exp().clamp(f64::MIN_POSITIVE, 1.0));
    }
    if tokens.is_empty() {
        return Err(Error::MissingLogprobs);
    }
    let seq = TokenProbSequence { tokens, probs };
    seq.validate()?;
    Ok(seq)
}

impl LmProvider for HttpLm {
    fn score_continuation(&self, req: &LmRequest) -> Result<TokenProbSequence> {
        req.validate()?;
        let full = format!("{}{}", req.prompt_text, req.answer_text);
        let body = json!({
            "model": req.model_id,
            "prompt": full,
            "echo": true,
            "max_tokens": 0,
            "logprobs": 0,
        });
        let text = self.post(body)?;
        parse_echoed_logprobs(&text, req.prompt_text.len())
    }

    fn generate(&self, prompt: &str, model_id: &str) -> Result<String> {
        let body = json!({
            "model": model_id,
            "prompt": prompt,
            "max_tokens": self.config.max_answer_tokens,
        });
        let text = self.post(body)?;
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| Error::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.text)
            .map(|t| t.trim().to_string())
            .ok_or_else(|| Error::MalformedResponse("response has no completion text".into()))
    }
}
