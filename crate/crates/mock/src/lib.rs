//! A deterministic stand-in for an OpenAI-compatible inference server.
//!
//! Serves `POST /chat/completions` (also under `/v1`) in one of several modes
//! and records every request body, which `GET /requests` returns. Requests are
//! handled one at a time.

use std::net::{SocketAddr, TcpListener};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::oneshot;

#[derive(Debug, Clone, PartialEq)]
pub enum MockMode {
    /// Replies in order, cycling.
    Scripted(Vec<String>),
    /// Returns the last user message.
    Echo,
    /// Ignores `max_tokens`: the reply is longer than `max_tokens * multiplier` characters.
    Overlong(u32),
    /// Sleeps, then answers as the inner mode.
    Delayed(Duration, Box<MockMode>),
    /// Answers with this HTTP status and an error body.
    Fail(u16),
}

impl MockMode {
    pub fn scripted<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        MockMode::Scripted(replies.into_iter().map(Into::into).collect())
    }

    pub fn delayed(delay: Duration, inner: MockMode) -> Self {
        MockMode::Delayed(delay, Box::new(inner))
    }

    pub fn validate(&self) -> Result<(), MockError> {
        match self {
            MockMode::Scripted(r) if r.is_empty() => Err(MockError::InvalidScript("scripted replies must not be empty")),
            MockMode::Overlong(0) => Err(MockError::InvalidScript("overlong multiplier must be at least 1")),
            MockMode::Fail(s) if !(100..=999).contains(s) => Err(MockError::InvalidScript("fail status must be 100..=999")),
            MockMode::Delayed(_, inner) => inner.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum MockError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid mock script: {0}")]
    InvalidScript(&'static str),
    #[error("cannot read fixture {path}: {reason}")]
    Fixture { path: String, reason: String },
}

/// Reads a fixture: a JSON list of reply strings.
pub fn load_fixture(path: &Path) -> Result<Vec<String>, MockError> {
    let err = |reason: String| MockError::Fixture { path: path.display().to_string(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let replies: Vec<String> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    if replies.is_empty() {
        return Err(err("fixture has no replies".into()));
    }
    Ok(replies)
}

#[derive(Debug)]
struct MockState {
    mode: MockMode,
    served_count: usize,
    cursor: usize,
    requests: Vec<Value>,
}

type Shared = Arc<(Mutex<MockState>, tokio::sync::Mutex<()>)>;

/// Running server; stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    state: Shared,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `bind` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(mode: MockMode, bind: &str) -> Result<Self, MockError> {
        mode.validate()?;
        let bind_err = |source| MockError::Bind { addr: bind.to_string(), source };
        let listener = TcpListener::bind(bind).map_err(bind_err)?;
        listener.set_nonblocking(true).map_err(bind_err)?;
        let addr = listener.local_addr().map_err(bind_err)?;

        let state: Shared = Arc::new((
            Mutex::new(MockState { mode, served_count: 0, cursor: 0, requests: Vec::new() }),
            tokio::sync::Mutex::new(()),
        ));
        let app = Router::new()
            .route("/chat/completions", post(completions))
            .route("/v1/chat/completions", post(completions))
            .route("/requests", get(requests))
            .with_state(state.clone());

        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name(format!("mock-llm-{}", addr.port()))
            .spawn(move || {
                let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().expect("tokio runtime");
                rt.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                    tokio::select! {
                        res = axum::serve(listener, app) => {
                            if let Err(e) = res {
                                tracing::error!("mock server stopped: {e}");
                            }
                        }
                        _ = stopped => {}
                    }
                });
            })
            .expect("spawn mock server thread");

        Ok(Self { addr, state, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to use as the client's endpoint (`.../v1`).
    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    fn lock(&self) -> MutexGuard<'_, MockState> {
        self.state.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn set_mode(&self, mode: MockMode) -> Result<(), MockError> {
        mode.validate()?;
        let mut s = self.lock();
        s.mode = mode;
        s.cursor = 0;
        Ok(())
    }

    pub fn served_count(&self) -> usize {
        self.lock().served_count
    }

    /// Request bodies received so far, in arrival order.
    pub fn requests(&self) -> Vec<Value> {
        self.lock().requests.clone()
    }

    /// Blocks until the server thread exits (it only does so on error or drop).
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Checks the fields the client is contracted to send; others are ignored.
fn validate_request(body: &Value) -> Result<(), String> {
    if !body.get("model").is_some_and(Value::is_string) {
        return Err("model must be a string".into());
    }
    if !body.get("temperature").is_some_and(Value::is_number) {
        return Err("temperature must be a number".into());
    }
    if !body.get("max_tokens").is_some_and(Value::is_u64) {
        return Err("max_tokens must be a non-negative integer".into());
    }
    let messages = body.get("messages").and_then(Value::as_array).ok_or("messages must be an array")?;
    for (i, m) in messages.iter().enumerate() {
        let role = m.get("role").and_then(Value::as_str);
        if !matches!(role, Some("system" | "user" | "assistant")) {
            return Err(format!("messages[{i}].role is invalid"));
        }
        if !m.get("content").is_some_and(Value::is_string) {
            return Err(format!("messages[{i}].content must be a string"));
        }
    }
    Ok(())
}

fn last_user_message(body: &Value) -> String {
    body["messages"]
        .as_array()
        .and_then(|ms| ms.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

const OVERLONG_SENTENCES: &[&str] = &[
    "ok so here's the thing, I kinda lost track of time.",
    "honestly it's fine though; nobody was counting anyway!",
    "wait what were we talking about again?",
    "lol yeah, that tracks.",
    "anyway the old computer hums along, slow but steady.",
];

/// Deterministic casual text strictly longer than `min_chars` characters.
pub fn overlong_text(min_chars: usize) -> String {
    let mut out = String::new();
    let mut i = 0;
    while out.chars().count() <= min_chars {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(OVERLONG_SENTENCES[i % OVERLONG_SENTENCES.len()]);
        i += 1;
    }
    out
}

enum Answer {
    Text(String, &'static str),
    Status(u16),
}

fn answer(mode: &MockMode, cursor: &mut usize, body: &Value) -> Answer {
    match mode {
        MockMode::Scripted(replies) => {
            let reply = replies[*cursor % replies.len()].clone();
            *cursor += 1;
            Answer::Text(reply, "stop")
        }
        MockMode::Echo => Answer::Text(last_user_message(body), "stop"),
        MockMode::Overlong(multiplier) => {
            let max_tokens = body["max_tokens"].as_u64().unwrap_or(0) as usize;
            Answer::Text(overlong_text(max_tokens * *multiplier as usize), "length")
        }
        MockMode::Delayed(_, inner) => answer(inner, cursor, body),
        MockMode::Fail(status) => Answer::Status(*status),
    }
}

fn total_delay(mode: &MockMode) -> Duration {
    match mode {
        MockMode::Delayed(d, inner) => *d + total_delay(inner),
        _ => Duration::ZERO,
    }
}

async fn completions(State(state): State<Shared>, body: Json<Value>) -> Response {
    let Json(body) = body;
    let _serial = state.1.lock().await;
    let delay = {
        let mut s = state.0.lock().unwrap_or_else(|e| e.into_inner());
        s.requests.push(body.clone());
        total_delay(&s.mode)
    };
    if let Err(reason) = validate_request(&body) {
        return (StatusCode::BAD_REQUEST, Json(json!({"error": {"message": reason, "type": "invalid_request_error"}})))
            .into_response();
    }
    if !delay.is_zero() {
        tokio::time::sleep(delay).await;
    }
    let (ans, served) = {
        let mut s = state.0.lock().unwrap_or_else(|e| e.into_inner());
        let MockState { mode, cursor, .. } = &mut *s;
        let ans = answer(mode, cursor, &body);
        s.served_count += 1;
        (ans, s.served_count)
    };
    match ans {
        Answer::Status(status) => {
            let code = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (code, Json(json!({"error": {"message": "mock failure", "type": "server_error"}}))).into_response()
        }
        Answer::Text(text, finish_reason) => {
            let prompt_tokens: usize = body["messages"]
                .as_array()
                .map(|ms| ms.iter().map(|m| m["content"].as_str().unwrap_or("").split_whitespace().count()).sum())
                .unwrap_or(0);
            let completion_tokens = text.split_whitespace().count();
            Json(json!({
                "id": format!("mock-{served}"),
                "object": "chat.completion",
                "created": 0,
                "model": body["model"],
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": finish_reason,
                }],
                "usage": {
                    "prompt_tokens": prompt_tokens,
                    "completion_tokens": completion_tokens,
                    "total_tokens": prompt_tokens + completion_tokens,
                },
            }))
            .into_response()
        }
    }
}

async fn requests(State(state): State<Shared>) -> Json<Value> {
    let s = state.0.lock().unwrap_or_else(|e| e.into_inner());
    Json(Value::Array(s.requests.clone()))
}
