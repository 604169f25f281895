//! HTTP gateway that lets a browser console act as the protocol guest.
//!
//! Each `POST /api/turn` runs the real guest cycle over the shared folder
//! (clear output, write input, bounded re-reads), so the UI goes through the
//! same encoding, framing and sync behaviour as the installation's guest.
//! JSON on this side is UTF-8; Mac OS Roman only exists on the file protocol.

use std::net::{SocketAddr, TcpListener};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bridge_core::guest::{self, GuestError, GuestPolicy, GuestReply, InputMode};
use bridge_core::share::{SharePaths, ShareFs};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::oneshot;

pub const SCREEN_WIDTH: u32 = 640;
pub const SCREEN_HEIGHT: u32 = 480;
pub const PALETTE: [&str; 2] = ["#000000", "#ffffff"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub lines: Vec<String>,
    pub dozed: bool,
    pub turn_id: u64,
}

/// A completed gateway turn as listed by `GET /api/transcript`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayTurn {
    pub request: TurnRequest,
    pub response: TurnResponse,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("a turn is already in flight")]
    Busy,
    #[error(transparent)]
    Guest(#[from] GuestError),
}

impl GatewayError {
    pub fn status(&self) -> StatusCode {
        match self {
            GatewayError::Busy => StatusCode::CONFLICT,
            GatewayError::Guest(GuestError::InputTooLong { .. } | GuestError::EmbeddedNewline) => {
                StatusCode::BAD_REQUEST
            }
            GatewayError::Guest(GuestError::Io { .. }) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Clone)]
pub struct GatewayConfig {
    pub paths: SharePaths,
    pub guest: GuestPolicy,
    /// Reported to the UI; the host enforces it.
    pub max_line_bytes: usize,
    /// Static UI assets, served at `/` when present.
    pub ui_dir: Option<PathBuf>,
}

/// Gateway state. At most one turn runs at a time per share directory.
pub struct Gateway {
    fs: Arc<dyn ShareFs>,
    cfg: GatewayConfig,
    in_flight: AtomicBool,
    next_turn_id: AtomicU64,
    transcript: RwLock<Vec<GatewayTurn>>,
}

struct InFlight<'a>(&'a AtomicBool);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

impl Gateway {
    pub fn new(fs: Arc<dyn ShareFs>, cfg: GatewayConfig) -> Self {
        Self {
            fs,
            cfg,
            in_flight: AtomicBool::new(false),
            next_turn_id: AtomicU64::new(1),
            transcript: RwLock::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    /// Runs send + poll for `text`. Blocks for up to the guest's read budget.
    pub fn handle_turn(&self, text: &str) -> Result<TurnResponse, GatewayError> {
        if self.in_flight.swap(true, Ordering::SeqCst) {
            return Err(GatewayError::Busy);
        }
        let _guard = InFlight(&self.in_flight);

        let fs = self.fs.as_ref();
        guest::send_input(fs, &self.cfg.paths, text, &self.cfg.guest, InputMode::Programmatic)?;
        let outcome = guest::poll_reply(fs, &self.cfg.paths, &self.cfg.guest)?;
        let turn_id = self.next_turn_id.fetch_add(1, Ordering::SeqCst);
        let response = match outcome.reply {
            GuestReply::Lines(lines) => TurnResponse { lines, dozed: false, turn_id },
            GuestReply::Dozed => TurnResponse { lines: Vec::new(), dozed: true, turn_id },
        };
        self.transcript
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .push(GatewayTurn { request: TurnRequest { text: text.to_string() }, response: response.clone() });
        Ok(response)
    }

    pub fn transcript(&self) -> Vec<GatewayTurn> {
        self.transcript.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn ui_config(&self) -> serde_json::Value {
        json!({
            "doze_message": self.cfg.guest.doze_message,
            "max_line_bytes": self.cfg.max_line_bytes,
            "max_input_chars": self.cfg.guest.max_input_chars,
            "max_read_attempts": self.cfg.guest.max_read_attempts,
            "attempt_interval_ms": self.cfg.guest.attempt_interval.as_millis() as u64,
            "screen": {
                "width": SCREEN_WIDTH,
                "height": SCREEN_HEIGHT,
                "palette": PALETTE,
            },
        })
    }
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/api/turn", post(turn))
        .route("/api/transcript", get(transcript))
        .route("/api/config", get(config))
        .route("/", get(index))
        .route("/{*path}", get(asset))
        .with_state(gateway)
}

fn error_response(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

async fn turn(State(gw): State<Arc<Gateway>>, Json(req): Json<TurnRequest>) -> Response {
    let worker = gw.clone();
    let result = tokio::task::spawn_blocking(move || worker.handle_turn(&req.text)).await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => {
            if !matches!(e, GatewayError::Busy) {
                tracing::warn!("gateway turn failed: {e}");
            }
            error_response(e.status(), e.to_string())
        }
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn transcript(State(gw): State<Arc<Gateway>>) -> Json<Vec<GatewayTurn>> {
    Json(gw.transcript())
}

async fn config(State(gw): State<Arc<Gateway>>) -> Json<serde_json::Value> {
    Json(gw.ui_config())
}

async fn index(State(gw): State<Arc<Gateway>>) -> Response {
    serve_asset(&gw, "index.html")
}

async fn asset(State(gw): State<Arc<Gateway>>, UrlPath(path): UrlPath<String>) -> Response {
    serve_asset(&gw, &path)
}

fn serve_asset(gw: &Gateway, rel: &str) -> Response {
    let Some(root) = &gw.cfg.ui_dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    match std::fs::read(root.join(rel)) {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(rel))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("woff2") => "font/woff2",
        Some("ttf") => "font/ttf",
        _ => "application/octet-stream",
    }
}

/// Gateway listening on a background thread; stops when dropped.
pub struct GatewayServer {
    addr: SocketAddr,
    gateway: Arc<Gateway>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl GatewayServer {
    pub fn start(gateway: Arc<Gateway>, bind: &str) -> std::io::Result<Self> {
        let listener = TcpListener::bind(bind)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let app = router(gateway.clone());
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("gateway".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                tokio::select! {
                    res = axum::serve(listener, app) => {
                        if let Err(e) = res {
                            tracing::error!("gateway stopped: {e}");
                        }
                    }
                    _ = stopped => {}
                }
            });
            rt.shutdown_background();
        })?;
        Ok(Self { addr, gateway, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }
}

impl Drop for GatewayServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
