//! Bridge configuration: flags over environment over config file over defaults.
//!
//! The config file is TOML with one table per subsystem:
//!
//! ```toml
//! [share]
//! dir = "share"
//! input_name = "input.txt"
//! output_name = "output.txt"
//!
//! [poll]
//! interval_ms = 250
//! stability_reads = 2
//!
//! [guest]
//! max_read_attempts = 10
//! attempt_interval_ms = 500
//! doze_message = "Robot dozed off..."
//! max_input_chars = 253
//!
//! [generation]
//! endpoint_url = "http://127.0.0.1:8000/v1"
//! model = "Llama-2-13b-chat"
//! temperature = 0.8
//! max_tokens = 60
//! request_timeout_ms = 30000
//!
//! [chunk]
//! max_line_bytes = 253
//! sentence_punct = ".!?…"
//! clause_punct = ",;:"
//! empty_reply_fallback = "..."
//!
//! [history]
//! window_rounds = 10
//! priming = "priming.json"
//!
//! [bridge]
//! transcript = "transcript.jsonl"
//! gateway_port = 8080
//! failure_line = "Robot brain freeze..."
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use bridge_core::chunker::ChunkPolicy;
use bridge_core::client::GenerationConfig;
use bridge_core::exchange::{PollPolicy, DEFAULT_FAILURE_LINE};
use bridge_core::guest::GuestPolicy;
use bridge_core::history::DEFAULT_WINDOW_ROUNDS;
use bridge_core::share::SharePaths;
use clap::Args;
use serde::Deserialize;
use thiserror::Error;

pub const ENV_SERVER_URL: &str = "BRIDGE_SERVER_URL";
pub const ENV_API_KEY: &str = "BRIDGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Flag,
    Env,
    File,
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Flag => "command-line flag",
            Source::Env => "environment",
            Source::File => "config file",
            Source::Default => "default",
        })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid {field} (from {origin}): {reason}")]
    Invalid { field: &'static str, origin: Source, reason: String },
    #[error("cannot read config file {path}: {reason}")]
    File { path: PathBuf, reason: String },
}

/// Flags shared by the `bridge` and `guest` subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// Shared folder used as the message transport
    #[arg(long)]
    pub share_dir: Option<PathBuf>,
    /// Base URL of the chat-completions endpoint (e.g. http://host:8000/v1)
    #[arg(long)]
    pub server_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Completed rounds kept in history (priming is always kept)
    #[arg(long)]
    pub history_rounds: Option<usize>,
    /// Byte budget of one reply line on the guest
    #[arg(long)]
    pub max_line_bytes: Option<usize>,
    /// Host poll interval for the input file
    #[arg(long)]
    pub poll_ms: Option<u64>,
    /// Guest read attempts before dozing off
    #[arg(long)]
    pub attempts: Option<usize>,
    /// Delay before each guest read attempt
    #[arg(long)]
    pub attempt_ms: Option<u64>,
    #[arg(long)]
    pub doze_message: Option<String>,
    /// JSON list of {role, content} priming messages
    #[arg(long)]
    pub priming: Option<PathBuf>,
    /// JSON Lines transcript, appended to
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Serve the HTTP gateway on this port
    #[arg(long)]
    pub gateway_port: Option<u16>,
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub share: ShareSection,
    #[serde(default)]
    pub poll: PollSection,
    #[serde(default)]
    pub guest: GuestSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub chunk: ChunkSection,
    #[serde(default)]
    pub history: HistorySection,
    #[serde(default)]
    pub bridge: BridgeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareSection {
    pub dir: Option<PathBuf>,
    pub input_name: Option<String>,
    pub output_name: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollSection {
    pub interval_ms: Option<u64>,
    pub stability_reads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuestSection {
    pub max_read_attempts: Option<usize>,
    pub attempt_interval_ms: Option<u64>,
    pub doze_message: Option<String>,
    pub max_input_chars: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub endpoint_url: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub request_timeout_ms: Option<u64>,
    pub api_key: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkSection {
    pub max_line_bytes: Option<usize>,
    pub sentence_punct: Option<String>,
    pub clause_punct: Option<String>,
    pub empty_reply_fallback: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySection {
    pub window_rounds: Option<usize>,
    pub priming: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSection {
    pub transcript: Option<PathBuf>,
    pub gateway_port: Option<u16>,
    pub failure_line: Option<String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeConfig {
    pub share: SharePaths,
    pub poll: PollPolicy,
    pub guest: GuestPolicy,
    pub gen: GenerationConfig,
    pub chunk: ChunkPolicy,
    pub history_window: usize,
    /// `None` uses the built-in example priming.
    pub priming_path: Option<PathBuf>,
    pub transcript_path: PathBuf,
    pub gateway_port: Option<u16>,
    pub failure_line: String,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            share: SharePaths::new("share"),
            poll: PollPolicy::default(),
            guest: GuestPolicy::default(),
            gen: GenerationConfig::default(),
            chunk: ChunkPolicy::default(),
            history_window: DEFAULT_WINDOW_ROUNDS,
            priming_path: None,
            transcript_path: PathBuf::from("transcript.jsonl"),
            gateway_port: None,
            failure_line: DEFAULT_FAILURE_LINE.to_string(),
        }
    }
}

/// Records where each field's value came from, for error messages.
#[derive(Default)]
struct Origins(HashMap<&'static str, Source>);

impl Origins {
    fn of(&self, field: &'static str) -> Source {
        self.0.get(field).copied().unwrap_or(Source::Default)
    }

    /// Applies the first present value in precedence order.
    fn pick<T>(&mut self, field: &'static str, slot: &mut T, candidates: [(Option<T>, Source); 3]) {
        if let Some((v, src)) = candidates.into_iter().find_map(|(v, s)| v.map(|v| (v, s))) {
            *slot = v;
            self.0.insert(field, src);
        }
    }
}

/// Merges the sources into a validated config. `env` looks up environment variables.
pub fn load_config(
    flags: &ConfigFlags,
    env: &dyn Fn(&str) -> Option<String>,
    file: Option<&ConfigFile>,
) -> Result<BridgeConfig, ConfigError> {
    let empty = ConfigFile::default();
    let file = file.unwrap_or(&empty);
    let mut cfg = BridgeConfig::default();
    let mut o = Origins::default();
    use Source::{Env, File, Flag};

    o.pick("share.dir", &mut cfg.share.dir, [(flags.share_dir.clone(), Flag), (None, Env), (file.share.dir.clone(), File)]);
    o.pick("share.input_name", &mut cfg.share.input_name, [(None, Flag), (None, Env), (file.share.input_name.clone(), File)]);
    o.pick("share.output_name", &mut cfg.share.output_name, [(None, Flag), (None, Env), (file.share.output_name.clone(), File)]);

    let poll_ms = [(flags.poll_ms, Flag), (None, Env), (file.poll.interval_ms, File)];
    o.pick("poll.interval_ms", &mut cfg.poll.interval, poll_ms.map(|(v, s)| (v.map(Duration::from_millis), s)));
    o.pick("poll.stability_reads", &mut cfg.poll.stability_reads, [(None, Flag), (None, Env), (file.poll.stability_reads, File)]);

    o.pick("guest.max_read_attempts", &mut cfg.guest.max_read_attempts, [(flags.attempts, Flag), (None, Env), (file.guest.max_read_attempts, File)]);
    let attempt_ms = [(flags.attempt_ms, Flag), (None, Env), (file.guest.attempt_interval_ms, File)];
    o.pick("guest.attempt_interval_ms", &mut cfg.guest.attempt_interval, attempt_ms.map(|(v, s)| (v.map(Duration::from_millis), s)));
    o.pick("guest.doze_message", &mut cfg.guest.doze_message, [(flags.doze_message.clone(), Flag), (None, Env), (file.guest.doze_message.clone(), File)]);
    o.pick("guest.max_input_chars", &mut cfg.guest.max_input_chars, [(None, Flag), (None, Env), (file.guest.max_input_chars, File)]);

    o.pick("generation.endpoint_url", &mut cfg.gen.endpoint_url, [(flags.server_url.clone(), Flag), (env(ENV_SERVER_URL), Env), (file.generation.endpoint_url.clone(), File)]);
    o.pick("generation.model", &mut cfg.gen.model_id, [(flags.model.clone(), Flag), (None, Env), (file.generation.model.clone(), File)]);
    o.pick("generation.temperature", &mut cfg.gen.temperature, [(flags.temperature, Flag), (None, Env), (file.generation.temperature, File)]);
    o.pick("generation.max_tokens", &mut cfg.gen.max_tokens, [(flags.max_tokens, Flag), (None, Env), (file.generation.max_tokens, File)]);
    let timeout = [(None, Flag), (None, Env), (file.generation.request_timeout_ms, File)];
    o.pick("generation.request_timeout_ms", &mut cfg.gen.request_timeout, timeout.map(|(v, s)| (v.map(Duration::from_millis), s)));
    let key = [(None, Flag), (env(ENV_API_KEY), Env), (file.generation.api_key.clone(), File)];
    o.pick("generation.api_key", &mut cfg.gen.api_key, key.map(|(v, s)| (v.map(Some), s)));

    o.pick("chunk.max_line_bytes", &mut cfg.chunk.max_line_bytes, [(flags.max_line_bytes, Flag), (None, Env), (file.chunk.max_line_bytes, File)]);
    let sentence = [(None, Flag), (None, Env), (file.chunk.sentence_punct.clone(), File)];
    o.pick("chunk.sentence_punct", &mut cfg.chunk.sentence_punct, sentence.map(|(v, s)| (v.map(|p| p.chars().collect()), s)));
    let clause = [(None, Flag), (None, Env), (file.chunk.clause_punct.clone(), File)];
    o.pick("chunk.clause_punct", &mut cfg.chunk.clause_punct, clause.map(|(v, s)| (v.map(|p| p.chars().collect()), s)));
    o.pick("chunk.empty_reply_fallback", &mut cfg.chunk.empty_reply_fallback, [(None, Flag), (None, Env), (file.chunk.empty_reply_fallback.clone(), File)]);

    o.pick("history.window_rounds", &mut cfg.history_window, [(flags.history_rounds, Flag), (None, Env), (file.history.window_rounds, File)]);
    let priming = [(flags.priming.clone(), Flag), (None, Env), (file.history.priming.clone(), File)];
    o.pick("history.priming", &mut cfg.priming_path, priming.map(|(v, s)| (v.map(Some), s)));

    o.pick("bridge.transcript", &mut cfg.transcript_path, [(flags.transcript.clone(), Flag), (None, Env), (file.bridge.transcript.clone(), File)]);
    let port = [(flags.gateway_port, Flag), (None, Env), (file.bridge.gateway_port, File)];
    o.pick("bridge.gateway_port", &mut cfg.gateway_port, port.map(|(v, s)| (v.map(Some), s)));
    o.pick("bridge.failure_line", &mut cfg.failure_line, [(None, Flag), (None, Env), (file.bridge.failure_line.clone(), File)]);

    validate(&cfg, &o)?;
    Ok(cfg)
}

fn validate(cfg: &BridgeConfig, o: &Origins) -> Result<(), ConfigError> {
    let invalid = |field: &'static str, reason: String| ConfigError::Invalid { field, origin: o.of(field), reason };

    cfg.share.validate().map_err(|e| invalid("share.input_name", e.to_string()))?;
    cfg.poll.validate().map_err(|e| {
        let field = if cfg.poll.interval.is_zero() { "poll.interval_ms" } else { "poll.stability_reads" };
        invalid(field, e.to_string())
    })?;
    if cfg.guest.max_read_attempts == 0 {
        return Err(invalid("guest.max_read_attempts", "must be at least 1".into()));
    }
    cfg.guest.validate().map_err(|e| {
        let field = if cfg.guest.max_input_chars == 0 { "guest.max_input_chars" } else { "guest.doze_message" };
        invalid(field, e)
    })?;
    cfg.gen.validate().map_err(|e| {
        use bridge_core::client::GenerationConfigError as G;
        let field = match e {
            G::Temperature(_) => "generation.temperature",
            G::MaxTokens => "generation.max_tokens",
            G::Timeout => "generation.request_timeout_ms",
            G::Endpoint(_) => "generation.endpoint_url",
        };
        invalid(field, e.to_string())
    })?;
    cfg.chunk.validate().map_err(|e| {
        use bridge_core::chunker::ChunkPolicyError as C;
        let field = match e {
            C::ZeroLineBudget => "chunk.max_line_bytes",
            C::OverlappingPunctuation(_) | C::WhitespacePunctuation(_) => "chunk.clause_punct",
            C::BlankFallback => "chunk.empty_reply_fallback",
        };
        invalid(field, e.to_string())
    })?;
    if cfg.history_window == 0 {
        return Err(invalid("history.window_rounds", "must be at least 1".into()));
    }
    if let Some(c) = cfg.failure_line.chars().find(|c| !bridge_core::codec::is_encodable(*c)) {
        return Err(invalid("bridge.failure_line", format!("{c:?} has no Mac OS Roman code point")));
    }
    Ok(())
}

/// Reads and parses the file named by `--config`, if any.
pub fn read_config_file(flags: &ConfigFlags) -> Result<Option<ConfigFile>, ConfigError> {
    let Some(path) = &flags.config else {
        return Ok(None);
    };
    let err = |reason: String| ConfigError::File { path: path.clone(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    ConfigFile::parse(&text).map(Some).map_err(|e| err(e.to_string()))
}
