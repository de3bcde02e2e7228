//! Text generation backends.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::parse_prompt;

pub const API_KEY_ENV: &str = "TRIAGE_GEN_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("generator timed out after {0:?}")]
    Timeout(Duration),
    #[error("generator connection failed: {0}")]
    Connection(String),
    #[error("generator returned an unusable response: {0}")]
    BadResponse(String),
    #[error("missing credential {0}")]
    MissingCredential(&'static str),
}

/// A completion model: prompt in, text out.
pub trait GeneratorBackend: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: u32, temperature: f64) -> Result<String, GeneratorError>;
}

/// Answers with the nearest retrieved record, or the transcript itself when
/// the prompt carries no context. Ignores temperature.
#[derive(Debug, Clone, Copy, Default)]
pub struct TopContextGenerator;

impl GeneratorBackend for TopContextGenerator {
    fn complete(&self, prompt: &str, _max_tokens: u32, _temperature: f64) -> Result<String, GeneratorError> {
        let parsed = parse_prompt(prompt).ok_or_else(|| GeneratorError::BadResponse("unrecognized prompt".into()))?;
        Ok(parsed.context.first().copied().unwrap_or(parsed.query).to_string())
    }
}

/// Canned predictions keyed by transcript, falling back to [`TopContextGenerator`].
#[derive(Debug, Clone, Default)]
pub struct FixtureGenerator {
    predictions: HashMap<String, String>,
}

impl FixtureGenerator {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self { predictions: pairs.into_iter().collect() }
    }
}

impl GeneratorBackend for FixtureGenerator {
    fn complete(&self, prompt: &str, max_tokens: u32, temperature: f64) -> Result<String, GeneratorError> {
        let parsed = parse_prompt(prompt).ok_or_else(|| GeneratorError::BadResponse("unrecognized prompt".into()))?;
        match self.predictions.get(parsed.query) {
            Some(p) => Ok(p.clone()),
            None => TopContextGenerator.complete(prompt, max_tokens, temperature),
        }
    }
}

/// Always fails, for exercising fallback paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnavailableGenerator;

impl GeneratorBackend for UnavailableGenerator {
    fn complete(&self, _: &str, _: u32, _: f64) -> Result<String, GeneratorError> {
        Err(GeneratorError::Connection("generator disabled".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatCompletionConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_ms: u64,
}

impl Default for ChatCompletionConfig {
    fn default() -> Self {
        Self { base_url: "https://api.openai.com/v1".into(), model: "gpt-3.5-turbo".into(), timeout_ms: 10_000 }
    }
}

/// Chat-completion HTTP endpoint (`POST {base_url}/chat/completions`).
#[derive(Debug, Clone)]
pub struct ChatCompletionGenerator {
    cfg: ChatCompletionConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl ChatCompletionGenerator {
    pub fn new(cfg: ChatCompletionConfig, api_key: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { cfg, api_key: api_key.into(), agent }
    }

    /// Build from config with the key taken from `TRIAGE_GEN_API_KEY`.
    pub fn from_env(cfg: ChatCompletionConfig) -> Result<Self, GeneratorError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| GeneratorError::MissingCredential(API_KEY_ENV))?;
        Ok(Self::new(cfg, key))
    }

    pub fn request_body(&self, prompt: &str, max_tokens: u32, temperature: f64) -> Value {
        json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": max_tokens,
            "temperature": temperature,
        })
    }
}

/// `choices[0].message.content`, trimmed.
pub fn parse_chat_response(body: &Value) -> Result<String, GeneratorError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string())
        .ok_or_else(|| GeneratorError::BadResponse(format!("no choices[0].message.content in {body}")))
}

impl GeneratorBackend for ChatCompletionGenerator {
    fn complete(&self, prompt: &str, max_tokens: u32, temperature: f64) -> Result<String, GeneratorError> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut response = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(self.request_body(prompt, max_tokens, temperature))
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => GeneratorError::Timeout(Duration::from_millis(self.cfg.timeout_ms)),
                other => GeneratorError::Connection(other.to_string()),
            })?;
        let status = response.status();
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| GeneratorError::BadResponse(e.to_string()))?;
        if !status.is_success() {
            return Err(GeneratorError::Connection(format!("HTTP {status}: {body}")));
        }
        parse_chat_response(&body)
    }
}
