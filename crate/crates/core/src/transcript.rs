//! Append-only JSON Lines transcript of completed turns.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::chunker::BreakKind;
use crate::exchange::{TurnOutcome, TurnRecord};

/// One transcript line. Text fields are UTF-8; `*_hex` carry the raw Mac OS Roman bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn_id: u64,
    pub started_at_ms: u64,
    pub finished_at_ms: u64,
    pub outcome: TurnOutcome,
    pub user_text: String,
    pub user_hex: String,
    pub reply_lines: Vec<String>,
    pub reply_hex: Vec<String>,
    pub break_kinds: Vec<BreakKind>,
}

impl TranscriptEntry {
    pub fn from_record(record: &TurnRecord) -> Self {
        Self {
            turn_id: record.turn_id,
            started_at_ms: unix_ms(record.started_at),
            finished_at_ms: unix_ms(record.finished_at),
            outcome: record.outcome.clone(),
            user_text: record.user_text.clone(),
            user_hex: record.user_raw.to_hex(),
            reply_lines: record.reply.line_texts(),
            reply_hex: record.reply.lines().iter().map(|l| l.hex()).collect(),
            break_kinds: record.reply.break_kinds().to_vec(),
        }
    }

    /// Zeroes the timing fields, for comparing runs.
    pub fn masked(mut self) -> Self {
        self.started_at_ms = 0;
        self.finished_at_ms = 0;
        self
    }
}

fn unix_ms(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

pub trait TranscriptSink {
    fn append(&mut self, record: &TurnRecord) -> io::Result<()>;
    fn flush(&mut self) -> io::Result<()>;
    /// Where the transcript goes, for error messages.
    fn path(&self) -> PathBuf;
}

pub struct JsonlTranscript<W: Write> {
    out: W,
    path: PathBuf,
}

impl JsonlTranscript<BufWriter<File>> {
    /// Opens `path` for appending, creating it if needed.
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { out: BufWriter::new(file), path: path.to_path_buf() })
    }
}

impl<W: Write> JsonlTranscript<W> {
    pub fn from_writer(out: W, label: impl Into<PathBuf>) -> Self {
        Self { out, path: label.into() }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TranscriptSink for JsonlTranscript<W> {
    fn append(&mut self, record: &TurnRecord) -> io::Result<()> {
        let entry = TranscriptEntry::from_record(record);
        serde_json::to_writer(&mut self.out, &entry)?;
        self.out.write_all(b"\n")?;
        // a line per turn reaches disk even if the process dies mid-session
        self.out.flush()
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    fn path(&self) -> PathBuf {
        self.path.clone()
    }
}

/// Collects records in memory.
#[derive(Debug, Default)]
pub struct MemoryTranscript {
    pub records: Vec<TurnRecord>,
}

impl TranscriptSink for MemoryTranscript {
    fn append(&mut self, record: &TurnRecord) -> io::Result<()> {
        self.records.push(record.clone());
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }

    fn path(&self) -> PathBuf {
        PathBuf::from("<memory>")
    }
}

/// Parses a JSON Lines transcript.
pub fn read_transcript(text: &str) -> serde_json::Result<Vec<TranscriptEntry>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
