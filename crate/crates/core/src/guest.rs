//! Guest-side stand-in for the emulator console program.
//!
//! The guest clears any stale reply, writes one line of input, then re-reads
//! the output file a bounded number of times. A reply counts once the file is
//! non-empty, ends in CR and an immediate confirmation read returns the same
//! bytes. If the attempts run out the guest dozes off.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, EncodePolicy};
use crate::share::{SharePaths, ShareFs, LINE_SEPARATOR};

pub const DEFAULT_DOZE_MESSAGE: &str = "Robot dozed off...";
pub const DEFAULT_MAX_READ_ATTEMPTS: usize = 10;
pub const DEFAULT_MAX_INPUT_CHARS: usize = 253;
pub const QUIT_COMMAND: &str = "/quit";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuestPolicy {
    pub max_read_attempts: usize,
    #[serde(with = "crate::millis")]
    pub attempt_interval: Duration,
    pub doze_message: String,
    pub max_input_chars: usize,
}

impl Default for GuestPolicy {
    fn default() -> Self {
        Self {
            max_read_attempts: DEFAULT_MAX_READ_ATTEMPTS,
            attempt_interval: Duration::from_millis(500),
            doze_message: DEFAULT_DOZE_MESSAGE.to_string(),
            max_input_chars: DEFAULT_MAX_INPUT_CHARS,
        }
    }
}

impl GuestPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_read_attempts == 0 {
            return Err("max_read_attempts must be at least 1".into());
        }
        if let Some(c) = self.doze_message.chars().find(|c| !codec::is_encodable(*c)) {
            return Err(format!("doze message contains {c:?}, which has no Mac OS Roman code point"));
        }
        if self.max_input_chars == 0 {
            return Err("max_input_chars must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuestReply {
    Lines(Vec<String>),
    Dozed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PollOutcome {
    pub reply: GuestReply,
    /// Attempts made, including the successful one.
    pub attempts_used: usize,
}

/// How embedded line separators in user input are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Strip them (terminal paste).
    Interactive,
    /// Reject them.
    Programmatic,
}

#[derive(Debug, Error)]
pub enum GuestError {
    #[error("input is {len} characters, limit is {max}")]
    InputTooLong { len: usize, max: usize },
    #[error("input contains a line separator")]
    EmbeddedNewline,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: PathBuf) -> impl FnOnce(std::io::Error) -> GuestError {
    move |source| GuestError::Io { path, source }
}

fn is_separator(c: char) -> bool {
    matches!(c, '\r' | '\n' | '\u{2028}' | '\u{2029}' | '\u{85}')
}

/// Clears the previous reply and writes `text` plus CR to the input file.
pub fn send_input(
    fs: &dyn ShareFs,
    paths: &SharePaths,
    text: &str,
    policy: &GuestPolicy,
    mode: InputMode,
) -> Result<(), GuestError> {
    let text: String = match mode {
        InputMode::Interactive => text.chars().filter(|c| !is_separator(*c)).collect(),
        InputMode::Programmatic if text.chars().any(is_separator) => return Err(GuestError::EmbeddedNewline),
        InputMode::Programmatic => text.to_string(),
    };
    let len = text.chars().count();
    if len > policy.max_input_chars {
        return Err(GuestError::InputTooLong { len, max: policy.max_input_chars });
    }
    let mut bytes = codec::encode_text(&text, EncodePolicy::default())
        .expect("substitution never fails")
        .into_bytes();
    bytes.push(LINE_SEPARATOR);

    let output = paths.output();
    fs.truncate(&output).map_err(io_err(output))?;
    let input = paths.input();
    fs.write(&input, &bytes).map_err(io_err(input))
}

/// Re-reads the output file up to `max_read_attempts` times, sleeping
/// `attempt_interval` before each attempt.
pub fn poll_reply(fs: &dyn ShareFs, paths: &SharePaths, policy: &GuestPolicy) -> Result<PollOutcome, GuestError> {
    let output = paths.output();
    for attempt in 1..=policy.max_read_attempts {
        thread::sleep(policy.attempt_interval);
        let bytes = fs.read(&output).map_err(io_err(output.clone()))?;
        if bytes.last() != Some(&LINE_SEPARATOR) {
            continue;
        }
        let confirm = fs.read(&output).map_err(io_err(output.clone()))?;
        if confirm != bytes {
            continue;
        }
        let lines = split_lines(&bytes);
        if lines.is_empty() {
            continue;
        }
        return Ok(PollOutcome { reply: GuestReply::Lines(lines), attempts_used: attempt });
    }
    Ok(PollOutcome { reply: GuestReply::Dozed, attempts_used: policy.max_read_attempts })
}

fn split_lines(bytes: &[u8]) -> Vec<String> {
    let mut parts: Vec<&[u8]> = bytes.split(|b| *b == LINE_SEPARATOR).collect();
    if parts.last().is_some_and(|p| p.is_empty()) {
        parts.pop();
    }
    parts.into_iter().map(codec::decode_bytes).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConsoleSummary {
    pub turns: usize,
    pub dozes: usize,
}

/// Terminal presentation of the guest console.
#[derive(Debug, Clone)]
pub struct ConsoleStyle {
    pub prompt: String,
    pub robot_prefix: String,
    /// Echo typed input after the prompt; useful when stdin is not a terminal.
    pub echo_input: bool,
}

impl Default for ConsoleStyle {
    fn default() -> Self {
        Self { prompt: "> ".into(), robot_prefix: "Robot: ".into(), echo_input: false }
    }
}

/// Prompt, send, poll and print until EOF or `/quit`. Each reply line is
/// printed as its own message; a doze prints the doze message verbatim.
pub fn run_console<R: BufRead, W: Write>(
    fs: &dyn ShareFs,
    paths: &SharePaths,
    policy: &GuestPolicy,
    style: &ConsoleStyle,
    mut input: R,
    mut out: W,
) -> Result<ConsoleSummary, GuestError> {
    let term = |e: std::io::Error| GuestError::Io { path: PathBuf::from("<terminal>"), source: e };
    let mut summary = ConsoleSummary::default();
    let mut line = String::new();
    loop {
        write!(out, "{}", style.prompt).map_err(term)?;
        out.flush().map_err(term)?;
        line.clear();
        if input.read_line(&mut line).map_err(term)? == 0 {
            writeln!(out).map_err(term)?;
            break;
        }
        let text: String = line.chars().filter(|c| !is_separator(*c)).collect();
        if style.echo_input {
            writeln!(out, "{text}").map_err(term)?;
        }
        let text = text.trim();
        if text == QUIT_COMMAND {
            break;
        }
        if text.is_empty() {
            continue;
        }
        match send_input(fs, paths, text, policy, InputMode::Interactive) {
            Ok(()) => {}
            Err(GuestError::InputTooLong { len, max }) => {
                writeln!(out, "(too long: {len} characters, max {max})").map_err(term)?;
                continue;
            }
            Err(e) => return Err(e),
        }
        summary.turns += 1;
        match poll_reply(fs, paths, policy)?.reply {
            GuestReply::Lines(lines) => {
                for l in lines {
                    writeln!(out, "{}{}", style.robot_prefix, l).map_err(term)?;
                }
            }
            GuestReply::Dozed => {
                summary.dozes += 1;
                writeln!(out, "{}", policy.doze_message).map_err(term)?;
            }
        }
    }
    // Leave nothing for the host to pick up after we are gone.
    let input_path = paths.input();
    fs.truncate(&input_path).map_err(io_err(input_path))?;
    out.flush().map_err(term)?;
    Ok(summary)
}
