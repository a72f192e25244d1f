use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompts::PromptId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout: Duration,
    pub max_concurrent: usize,
    /// First transport-retry delay; doubles on each further retry.
    pub backoff_base: Duration,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1".into(),
            model: "deepseek-chat".into(),
            temperature: 0.0,
            max_retries: 3,
            timeout: Duration::from_secs(60),
            max_concurrent: 4,
            backoff_base: Duration::from_millis(500),
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature != 0.0 {
            return Err(Error::InvalidConfig("scoring temperature must be 0".into()));
        }
        if self.max_concurrent == 0 {
            return Err(Error::InvalidConfig("max_concurrent must be at least 1".into()));
        }
        if self.model.trim().is_empty() {
            return Err(Error::InvalidConfig("model name is empty".into()));
        }
        Ok(())
    }
}

/// One scoring call: the rendered prompt plus the key it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub respondent_id: &'a str,
    pub task: &'a str,
    pub prompt_id: PromptId,
    pub prompt: &'a str,
}

/// A chat-completion backend. `Err` carries a transport-level failure message.
pub trait ChatBackend: Sync {
    fn complete(&self, request: &ScoreRequest<'_>) -> std::result::Result<String, String>;
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking client for `POST {endpoint}/chat/completions`.
pub struct HttpChatBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpChatBackend {
    pub fn new(config: &ScorerConfig, api_key: Option<String>) -> Result<Self> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", config.endpoint.trim_end_matches('/')),
            model: config.model.clone(),
            api_key,
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ScoreRequest<'_>) -> std::result::Result<String, String> {
        let body = ChatRequest {
            model: &self.model,
            temperature: 0.0,
            messages: [ChatMessage {
                role: "user",
                content: request.prompt,
            }],
        };
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(&body).map_err(|e| e.to_string())?;
        let parsed: ChatResponse = response.body_mut().read_json().map_err(|e| e.to_string())?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| "reply has no choices".to_string())
    }
}

/// Accepts exactly the replies whose trimmed content is one of "1".."5".
pub fn parse_score(reply: &str) -> Option<u8> {
    match reply.trim() {
        "1" => Some(1),
        "2" => Some(2),
        "3" => Some(3),
        "4" => Some(4),
        "5" => Some(5),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreOutcome {
    pub score: Option<u8>,
    pub raw_reply: String,
    /// Total requests issued, including failed ones.
    pub attempts: u32,
}

/// Sends one prompt, re-asking up to `max_retries` times on unparseable
/// replies and retrying transport failures with exponential backoff.
/// Unparseable replies end as a missing score; exhausted transport retries
/// are an error.
pub fn score_text(
    backend: &dyn ChatBackend,
    config: &ScorerConfig,
    request: &ScoreRequest<'_>,
) -> Result<ScoreOutcome> {
    let mut attempts = 0;
    let mut transport_failures = 0;
    let mut parse_failures = 0;
    loop {
        attempts += 1;
        match backend.complete(request) {
            Err(message) => {
                transport_failures += 1;
                if transport_failures > config.max_retries {
                    return Err(Error::Transport { attempts, message });
                }
                let factor = 1u32 << (transport_failures - 1).min(16);
                thread::sleep(config.backoff_base * factor);
            }
            Ok(reply) => {
                if let Some(score) = parse_score(&reply) {
                    return Ok(ScoreOutcome {
                        score: Some(score),
                        raw_reply: reply,
                        attempts,
                    });
                }
                parse_failures += 1;
                if parse_failures > config.max_retries {
                    return Ok(ScoreOutcome {
                        score: None,
                        raw_reply: reply,
                        attempts,
                    });
                }
            }
        }
    }
}
