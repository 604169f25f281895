//! Blocking client for OpenAI-compatible chat-completions endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::{ChatHistory, ChatMessage, TurnError};

pub const DEFAULT_MODEL: &str = "Llama-2-13b-chat";
pub const DEFAULT_TEMPERATURE: f64 = 0.8;
pub const DEFAULT_MAX_TOKENS: u32 = 60;
pub const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8000/v1";

const BODY_EXCERPT_CHARS: usize = 200;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(with = "crate::millis")]
    pub request_timeout: Duration,
    pub api_key: Option<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            endpoint_url: DEFAULT_ENDPOINT.to_string(),
            model_id: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            request_timeout: Duration::from_secs(30),
            api_key: None,
        }
    }
}

impl std::fmt::Debug for GenerationConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenerationConfig")
            .field("endpoint_url", &self.endpoint_url)
            .field("model_id", &self.model_id)
            .field("temperature", &self.temperature)
            .field("max_tokens", &self.max_tokens)
            .field("request_timeout", &self.request_timeout)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationConfigError {
    #[error("temperature {0} is outside 0..=2")]
    Temperature(f64),
    #[error("max_tokens must be at least 1")]
    MaxTokens,
    #[error("request_timeout must be positive")]
    Timeout,
    #[error("endpoint_url {0:?} is not an http(s) URL")]
    Endpoint(String),
}

impl GenerationConfig {
    pub fn with_endpoint(endpoint_url: impl Into<String>) -> Self {
        Self { endpoint_url: endpoint_url.into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GenerationConfigError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GenerationConfigError::Temperature(self.temperature));
        }
        if self.max_tokens == 0 {
            return Err(GenerationConfigError::MaxTokens);
        }
        if self.request_timeout.is_zero() {
            return Err(GenerationConfigError::Timeout);
        }
        if !(self.endpoint_url.starts_with("http://") || self.endpoint_url.starts_with("https://")) {
            return Err(GenerationConfigError::Endpoint(self.endpoint_url.clone()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.endpoint_url.trim_end_matches('/'))
    }
}

/// Chat-completions request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u32,
    #[serde(default)]
    pub completion_tokens: u32,
    #[serde(default)]
    pub total_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResult {
    pub text: String,
    pub finish_reason: Option<String>,
    pub usage: Option<Usage>,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Turn(#[from] TurnError),
    #[error("transport error talking to {url}: {message}")]
    Transport { url: String, message: String },
    #[error("server returned {status}: {body}")]
    Server { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl GenerationError {
    /// Short tag for logs and transcripts.
    pub fn kind(&self) -> &'static str {
        match self {
            GenerationError::Turn(_) => "turn",
            GenerationError::Transport { .. } => "transport",
            GenerationError::Server { .. } => "server",
            GenerationError::MalformedResponse(_) => "malformed_response",
        }
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<ResponseMessage>,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

pub fn build_request(history: &ChatHistory, cfg: &GenerationConfig) -> Result<GenerationRequest, TurnError> {
    if !history.has_open_turn() {
        return Err(TurnError::NoOpenTurn);
    }
    Ok(GenerationRequest {
        model: cfg.model_id.clone(),
        messages: history.render_messages(),
        temperature: cfg.temperature,
        max_tokens: cfg.max_tokens,
    })
}

/// Stateless apart from its connection pool; share freely.
#[derive(Debug, Clone)]
pub struct ChatClient {
    cfg: GenerationConfig,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(cfg: GenerationConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { cfg, agent }
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.cfg
    }

    /// Sends the history's pending turn and returns the first choice, trailing
    /// whitespace trimmed. Replies longer than `max_tokens` are passed through
    /// whole. No retries.
    pub fn generate(&self, history: &ChatHistory) -> Result<GenerationResult, GenerationError> {
        let request = build_request(history, &self.cfg)?;
        self.send(&request)
    }

    pub fn send(&self, request: &GenerationRequest) -> Result<GenerationResult, GenerationError> {
        let url = self.cfg.completions_url();
        let transport = |e: ureq::Error| GenerationError::Transport { url: url.clone(), message: e.to_string() };
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.cfg.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(request).map_err(transport)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(transport)?;
        if !(200..300).contains(&status) {
            return Err(GenerationError::Server { status, body: excerpt(&body) });
        }
        parse_response(&body)
    }
}

fn parse_response(body: &str) -> Result<GenerationResult, GenerationError> {
    let parsed: CompletionResponse = serde_json::from_str(body)
        .map_err(|e| GenerationError::MalformedResponse(format!("{e}; body: {}", excerpt(body))))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GenerationError::MalformedResponse("no choices".into()))?;
    let content = choice
        .message
        .and_then(|m| m.content)
        .ok_or_else(|| GenerationError::MalformedResponse("first choice has no message content".into()))?;
    Ok(GenerationResult {
        text: content.trim_end().to_string(),
        finish_reason: choice.finish_reason,
        usage: parsed.usage,
    })
}

fn excerpt(body: &str) -> String {
    let mut chars = body.chars();
    let head: String = chars.by_ref().take(BODY_EXCERPT_CHARS).collect();
    if chars.next().is_some() {
        format!("{head}...")
    } else {
        head
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn history_with(priming: usize, rounds: usize) -> ChatHistory {
        let p = (0..priming).map(|i| ChatMessage::user(format!("p{i}"))).collect();
        let mut h = ChatHistory::new(p, 10);
        for i in 0..rounds {
            h.begin_turn(format!("u{i}")).unwrap();
            h.complete_turn(format!("a{i}")).unwrap();
        }
        h
    }

    #[test]
    fn defaults_serialize_temperature() {
        let mut h = history_with(0, 0);
        h.begin_turn("hi").unwrap();
        let req = build_request(&h, &GenerationConfig::default()).unwrap();
        let body = serde_json::to_value(&req).unwrap();
        assert_eq!(body["temperature"], serde_json::json!(0.8));
        assert_eq!(body["max_tokens"], serde_json::json!(60));
        assert_eq!(body["model"], "Llama-2-13b-chat");
        assert_eq!(body["messages"][0], serde_json::json!({"role": "user", "content": "hi"}));
    }

    #[test]
    fn message_counts() {
        let mut h = history_with(3, 0);
        h.begin_turn("x").unwrap();
        assert_eq!(build_request(&h, &GenerationConfig::default()).unwrap().messages.len(), 4);

        let mut h = history_with(3, 10);
        h.begin_turn("x").unwrap();
        let before = h.clone();
        let req = build_request(&h, &GenerationConfig::default()).unwrap();
        assert_eq!(req.messages.len(), 3 + 21);
        assert_eq!(h, before);
    }

    #[test]
    fn requires_open_turn() {
        let h = history_with(1, 1);
        assert_eq!(build_request(&h, &GenerationConfig::default()), Err(TurnError::NoOpenTurn));
    }

    #[test]
    fn config_validation() {
        assert!(GenerationConfig::default().validate().is_ok());
        let bad = GenerationConfig { temperature: 2.5, ..Default::default() };
        assert_eq!(bad.validate(), Err(GenerationConfigError::Temperature(2.5)));
        let bad = GenerationConfig { max_tokens: 0, ..Default::default() };
        assert_eq!(bad.validate(), Err(GenerationConfigError::MaxTokens));
        let bad = GenerationConfig::with_endpoint("localhost:80");
        assert!(matches!(bad.validate(), Err(GenerationConfigError::Endpoint(_))));
    }

    #[test]
    fn url_join() {
        assert_eq!(
            GenerationConfig::with_endpoint("http://h:1/v1/").completions_url(),
            "http://h:1/v1/chat/completions"
        );
    }

    #[test]
    fn parse_variants() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hey hey  \n"},"finish_reason":"stop"}]}"#;
        let r = parse_response(ok).unwrap();
        assert_eq!(r.text, "hey hey");
        assert_eq!(r.finish_reason.as_deref(), Some("stop"));

        assert!(matches!(parse_response(r#"{"choices":[]}"#), Err(GenerationError::MalformedResponse(_))));
        assert!(matches!(
            parse_response(r#"{"choices":[{"message":{"role":"assistant"}}]}"#),
            Err(GenerationError::MalformedResponse(_))
        ));
        assert!(matches!(parse_response("not json"), Err(GenerationError::MalformedResponse(_))));
    }

    #[test]
    fn api_key_is_redacted_in_debug() {
        let cfg = GenerationConfig { api_key: Some("sk-secret".into()), ..Default::default() };
        assert!(!format!("{cfg:?}").contains("sk-secret"));
    }
}
