//! Ranking through a chat-completion endpoint.
//!
//! The ranking prompt goes out as a single user message. The reply is
//! scanned token by token for the first code that belongs to the candidate
//! pool; anything else (prose, hallucinated codes, transport errors) counts
//! as a failed attempt. When every attempt fails the ranker picks uniformly
//! at random and flags the decision.

use std::time::Duration;

use rand::RngCore;
use reqwest::Url;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{rank_random, RankDecision, RankError, Ranker};
use crate::record::ArchRecord;
use crate::space::NCode;
use crate::trajectory::{render_prompt, sort_history, HistoryEntry};

pub const DEFAULT_API_KEY_ENV: &str = "LM_SEARCHER_API_KEY";

fn default_retries() -> u32 {
    3
}
fn default_timeout() -> f64 {
    60.0
}
fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}
fn default_decimals() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_decimals")]
    pub performance_decimals: usize,
}

impl LlmEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_retries: default_retries(),
            timeout_secs: default_timeout(),
            api_key_env: default_key_env(),
            performance_decimals: default_decimals(),
        }
    }
}

/// First whitespace- or punctuation-delimited token of `reply` that is a
/// member of `candidates`.
pub fn parse_reply(reply: &str, candidates: &[NCode]) -> Option<NCode> {
    reply
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse::<NCode>().ok())
        .find(|code| candidates.contains(code))
}

pub struct LlmRanker {
    cfg: LlmEndpointConfig,
    endpoint: Url,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl LlmRanker {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(cfg: LlmEndpointConfig) -> Result<Self, RankError> {
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| RankError::Config(format!("environment variable {} is not set", cfg.api_key_env)))?;
        Self::with_api_key(cfg, key)
    }

    pub fn with_api_key(cfg: LlmEndpointConfig, api_key: String) -> Result<Self, RankError> {
        if !(cfg.timeout_secs > 0.0 && cfg.timeout_secs.is_finite()) {
            return Err(RankError::Config("timeout_secs must be positive".into()));
        }
        if cfg.temperature.is_nan() || cfg.temperature < 0.0 {
            return Err(RankError::Config("temperature must be >= 0".into()));
        }
        let base =
            Url::parse(&cfg.base_url).map_err(|e| RankError::Config(format!("base_url {:?}: {e}", cfg.base_url)))?;
        if !matches!(base.scheme(), "http" | "https") {
            return Err(RankError::Config(format!(
                "base_url {:?}: unsupported scheme",
                cfg.base_url
            )));
        }
        let endpoint = Url::parse(&format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')))
            .map_err(|e| RankError::Config(e.to_string()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| RankError::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            endpoint,
            api_key,
            client,
        })
    }

    pub fn prompt(&self, history: &[ArchRecord], candidates: &[NCode]) -> String {
        let mut entries: Vec<HistoryEntry> = history.iter().map(HistoryEntry::from).collect();
        sort_history(&mut entries);
        render_prompt(&entries, candidates, self.cfg.performance_decimals)
    }

    fn complete(&self, prompt: &str) -> Result<String, String> {
        let body = json!({
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        });
        let mut request = self.client.post(self.endpoint.clone()).json(&body);
        if !self.api_key.is_empty() {
            request = request.bearer_auth(&self.api_key);
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("endpoint returned {status}"));
        }
        let completion: Completion = response.json().map_err(|e| e.to_string())?;
        completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| "reply has no message content".to_string())
    }
}

impl Ranker for LlmRanker {
    fn name(&self) -> &'static str {
        "llm"
    }

    fn rank(
        &mut self,
        history: &[ArchRecord],
        candidates: &[NCode],
        rng: &mut dyn RngCore,
    ) -> Result<RankDecision, RankError> {
        if candidates.is_empty() {
            return Err(RankError::EmptyCandidates);
        }
        let prompt = self.prompt(history, candidates);
        let mut last_reply = None;
        for attempt in 0..=self.cfg.max_retries {
            match self.complete(&prompt) {
                Ok(reply) => {
                    if let Some(chosen) = parse_reply(&reply, candidates) {
                        return Ok(RankDecision {
                            chosen,
                            ranking: None,
                            fallback_used: false,
                            raw_reply: Some(reply),
                        });
                    }
                    log::warn!("attempt {attempt}: reply names no candidate");
                    last_reply = Some(reply);
                }
                Err(e) => log::warn!("attempt {attempt}: {e}"),
            }
        }
        let mut decision = rank_random(candidates, rng)?;
        decision.fallback_used = true;
        decision.raw_reply = last_reply;
        Ok(decision)
    }
}
