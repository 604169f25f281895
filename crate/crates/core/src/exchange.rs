//! Host side of the shared-folder protocol.
//!
//! A turn starts when the input file is non-empty and its bytes have been
//! identical for `stability_reads` consecutive polls. The host consumes the
//! input by truncating it, asks the model, and publishes the framed reply with
//! a temp-file rename. An empty input file means the guest is ready for the
//! next turn.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::chunker::{chunk_reply, ChunkPolicy, FramedReply};
use crate::client::ChatClient;
use crate::codec::{self, EncodePolicy, MacRomanBytes, UnmappableCharacter};
use crate::history::{ChatHistory, TurnError};
use crate::share::{SharePaths, ShareFs, LINE_SEPARATOR};
use crate::transcript::TranscriptSink;

pub const MAX_INPUT_BYTES: usize = 4096;
pub const DEFAULT_FAILURE_LINE: &str = "Robot brain freeze...";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollPolicy {
    #[serde(with = "crate::millis")]
    pub interval: Duration,
    pub stability_reads: usize,
}

impl Default for PollPolicy {
    fn default() -> Self {
        Self { interval: Duration::from_millis(250), stability_reads: 2 }
    }
}

impl PollPolicy {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.interval.is_zero() {
            return Err("poll interval must be positive");
        }
        if self.stability_reads == 0 {
            return Err("stability_reads must be at least 1");
        }
        Ok(())
    }
}

/// Cooperative stop flag shared between the loop and whoever stops it.
#[derive(Debug, Clone, Default)]
pub struct Shutdown(Arc<AtomicBool>);

impl Shutdown {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trigger(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_triggered(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }

    /// Sleeps up to `d`, returning early (true) if shutdown was requested.
    pub fn sleep(&self, d: Duration) -> bool {
        const SLICE: Duration = Duration::from_millis(20);
        let mut left = d;
        while !left.is_zero() {
            if self.is_triggered() {
                return true;
            }
            let step = left.min(SLICE);
            std::thread::sleep(step);
            left -= step;
        }
        self.is_triggered()
    }
}

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Turn(#[from] TurnError),
    #[error(transparent)]
    Encoding(#[from] UnmappableCharacter),
}

impl ExchangeError {
    fn io(path: PathBuf) -> impl FnOnce(std::io::Error) -> ExchangeError {
        move |source| ExchangeError::Io { path, source }
    }
}

/// Input consumed from the guest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumedInput {
    pub text: String,
    /// The consumed file bytes, after the 4096-byte cap.
    pub raw: MacRomanBytes,
}

/// Blocks until a stable, non-empty input arrives, then consumes it.
///
/// Returns `None` if `shutdown` fires first. Only the first line is returned;
/// input made only of separators is consumed and ignored.
pub fn await_input(
    fs: &dyn ShareFs,
    paths: &SharePaths,
    poll: &PollPolicy,
    shutdown: &Shutdown,
) -> Result<Option<ConsumedInput>, ExchangeError> {
    let input_path = paths.input();
    let stability = poll.stability_reads.max(1);
    let mut last: Option<Vec<u8>> = None;
    let mut identical = 0usize;
    loop {
        if shutdown.is_triggered() {
            return Ok(None);
        }
        let bytes = fs.read(&input_path).map_err(ExchangeError::io(input_path.clone()))?;
        if bytes.is_empty() {
            last = None;
            identical = 0;
        } else {
            if last.as_deref() == Some(bytes.as_slice()) {
                identical += 1;
            } else {
                identical = 1;
                last = Some(bytes.clone());
            }
            if identical >= stability {
                fs.truncate(&input_path).map_err(ExchangeError::io(input_path.clone()))?;
                match parse_input(bytes) {
                    Some(input) => return Ok(Some(input)),
                    None => {
                        debug!("ignoring blank input");
                        last = None;
                        identical = 0;
                    }
                }
            }
        }
        if shutdown.sleep(poll.interval) {
            return Ok(None);
        }
    }
}

fn parse_input(mut bytes: Vec<u8>) -> Option<ConsumedInput> {
    if bytes.len() > MAX_INPUT_BYTES {
        warn!(len = bytes.len(), "input longer than {MAX_INPUT_BYTES} bytes, truncating");
        bytes.truncate(MAX_INPUT_BYTES);
    }
    let first_line = bytes.split(|b| *b == b'\r' || *b == b'\n').next().unwrap_or(&[]);
    if first_line.iter().all(|b| b.is_ascii_whitespace()) {
        return None;
    }
    let text = codec::decode_bytes(first_line);
    Some(ConsumedInput { text, raw: MacRomanBytes::new(bytes) })
}

/// Writes every line followed by `separator`, atomically replacing the output file.
pub fn publish_reply(
    fs: &dyn ShareFs,
    paths: &SharePaths,
    reply: &FramedReply,
    separator: u8,
) -> Result<(), ExchangeError> {
    let out = paths.output();
    fs.replace(&out, &reply.to_wire(&[separator])).map_err(ExchangeError::io(out))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TurnOutcome {
    Completed,
    GenerationFailed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnRecord {
    pub turn_id: u64,
    pub user_text: String,
    pub user_raw: MacRomanBytes,
    pub reply: FramedReply,
    pub started_at: SystemTime,
    pub finished_at: SystemTime,
    pub outcome: TurnOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeSettings {
    pub paths: SharePaths,
    pub poll: PollPolicy,
    pub chunk: ChunkPolicy,
    pub separator: u8,
    pub failure_line: String,
}

impl ExchangeSettings {
    pub fn new(paths: SharePaths) -> Self {
        Self {
            paths,
            poll: PollPolicy::default(),
            chunk: ChunkPolicy::default(),
            separator: LINE_SEPARATOR,
            failure_line: DEFAULT_FAILURE_LINE.to_string(),
        }
    }
}

/// One conversation on one share directory. Turns are strictly serial.
pub struct Exchange {
    fs: Arc<dyn ShareFs>,
    settings: ExchangeSettings,
    client: ChatClient,
    history: ChatHistory,
    next_turn_id: u64,
}

impl Exchange {
    pub fn new(fs: Arc<dyn ShareFs>, settings: ExchangeSettings, client: ChatClient, history: ChatHistory) -> Self {
        Self { fs, settings, client, history, next_turn_id: 1 }
    }

    pub fn history(&self) -> &ChatHistory {
        &self.history
    }

    pub fn settings(&self) -> &ExchangeSettings {
        &self.settings
    }

    /// Waits for input and runs one full turn. `None` means shutdown.
    ///
    /// Generation failures publish the failure line and leave history as it
    /// was; I/O failures roll back the open turn and are returned.
    pub fn run_turn(&mut self, shutdown: &Shutdown) -> Result<Option<TurnRecord>, ExchangeError> {
        let s = &self.settings;
        let Some(input) = await_input(self.fs.as_ref(), &s.paths, &s.poll, shutdown)? else {
            return Ok(None);
        };
        let started_at = SystemTime::now();
        let turn_id = self.next_turn_id;
        self.next_turn_id += 1;
        debug!(turn_id, user = %input.text, "input consumed");

        self.history.begin_turn(input.text.clone())?;
        let generated = self.client.generate(&self.history);
        let (reply, outcome, model_text) = match generated {
            Ok(result) => {
                let reply = chunk_reply(&result.text, &s.chunk, EncodePolicy::default())?;
                (reply, TurnOutcome::Completed, Some(result.text))
            }
            Err(e) => {
                warn!(turn_id, cause = e.kind(), error = %e, "generation failed");
                let reply = chunk_reply(&s.failure_line, &s.chunk, EncodePolicy::default())?;
                (reply, TurnOutcome::GenerationFailed { reason: e.to_string() }, None)
            }
        };

        if let Err(e) = publish_reply(self.fs.as_ref(), &s.paths, &reply, s.separator) {
            self.history.abort_turn()?;
            return Err(e);
        }
        match model_text {
            Some(text) => self.history.complete_turn(text)?,
            None => {
                self.history.abort_turn()?;
            }
        }
        info!(turn_id, lines = reply.len(), rounds = self.history.round_count(), "reply published");

        Ok(Some(TurnRecord {
            turn_id,
            user_text: input.text,
            user_raw: input.raw,
            reply,
            started_at,
            finished_at: SystemTime::now(),
            outcome,
        }))
    }

    /// Runs turns until shutdown (or `max_turns`), appending each record to
    /// `sink`. Returns the number of turns run. The sink is flushed on every
    /// exit path.
    pub fn run_loop(
        &mut self,
        sink: &mut dyn TranscriptSink,
        shutdown: &Shutdown,
        max_turns: Option<usize>,
    ) -> Result<usize, ExchangeError> {
        let mut turns = 0;
        let result = loop {
            if max_turns.is_some_and(|m| turns >= m) {
                break Ok(turns);
            }
            match self.run_turn(shutdown) {
                Ok(Some(record)) => {
                    turns += 1;
                    if let Err(e) = sink.append(&record) {
                        break Err(ExchangeError::Io { path: sink.path(), source: e });
                    }
                }
                Ok(None) => break Ok(turns),
                Err(e) => break Err(e),
            }
        };
        let flushed = sink.flush().map_err(|source| ExchangeError::Io { path: sink.path(), source });
        let turns = result?;
        flushed?;
        Ok(turns)
    }
}
