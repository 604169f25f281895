//! Reply framing: split model output into lines that fit the guest's line buffer.
//!
//! Every character encodes to exactly one Mac OS Roman byte, so a line's byte
//! length equals its character count. For each line the chunker takes the
//! longest prefix that fits, then backs off to the best break inside it:
//! sentence punctuation, then clause punctuation, then plain whitespace, and
//! only if none exist a hard split at the budget. Ties go to the later break.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, EncodePolicy, MacRomanBytes, UnmappableCharacter};

pub const DEFAULT_MAX_LINE_BYTES: usize = 253;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkPolicyError {
    #[error("max_line_bytes must be at least 1")]
    ZeroLineBudget,
    #[error("punctuation {0:?} is in both the sentence and clause sets")]
    OverlappingPunctuation(char),
    #[error("punctuation {0:?} is whitespace")]
    WhitespacePunctuation(char),
    #[error("empty_reply_fallback must contain a non-whitespace character")]
    BlankFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPolicy {
    pub max_line_bytes: usize,
    pub sentence_punct: BTreeSet<char>,
    pub clause_punct: BTreeSet<char>,
    pub empty_reply_fallback: String,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        Self {
            max_line_bytes: DEFAULT_MAX_LINE_BYTES,
            sentence_punct: ['.', '!', '?', '…'].into_iter().collect(),
            clause_punct: [',', ';', ':'].into_iter().collect(),
            empty_reply_fallback: "...".to_string(),
        }
    }
}

impl ChunkPolicy {
    pub fn with_max_line_bytes(max_line_bytes: usize) -> Self {
        Self { max_line_bytes, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ChunkPolicyError> {
        if self.max_line_bytes == 0 {
            return Err(ChunkPolicyError::ZeroLineBudget);
        }
        if let Some(c) = self.sentence_punct.intersection(&self.clause_punct).next() {
            return Err(ChunkPolicyError::OverlappingPunctuation(*c));
        }
        if let Some(c) = self.sentence_punct.iter().chain(&self.clause_punct).find(|c| c.is_whitespace()) {
            return Err(ChunkPolicyError::WhitespacePunctuation(*c));
        }
        if self.empty_reply_fallback.trim().is_empty() {
            return Err(ChunkPolicyError::BlankFallback);
        }
        Ok(())
    }

    fn classify(&self, before_break: char) -> BreakKind {
        if self.sentence_punct.contains(&before_break) {
            BreakKind::SentencePunct
        } else if self.clause_punct.contains(&before_break) {
            BreakKind::ClausePunct
        } else {
            BreakKind::Whitespace
        }
    }
}

/// Why a line ended. Ordered by break preference; `End` marks the last line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakKind {
    Hard,
    Whitespace,
    ClausePunct,
    SentencePunct,
    End,
}

/// One framed line in Mac OS Roman; never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedLine(MacRomanBytes);

impl EncodedLine {
    pub fn bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn byte_len(&self) -> usize {
        self.0.len()
    }

    pub fn text(&self) -> String {
        self.0.decode()
    }

    pub fn hex(&self) -> String {
        self.0.to_hex()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramedReply {
    lines: Vec<EncodedLine>,
    break_kinds: Vec<BreakKind>,
}

impl FramedReply {
    pub fn lines(&self) -> &[EncodedLine] {
        &self.lines
    }

    pub fn break_kinds(&self) -> &[BreakKind] {
        &self.break_kinds
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn line_texts(&self) -> Vec<String> {
        self.lines.iter().map(EncodedLine::text).collect()
    }

    /// Lines joined with `separator`, each line terminated by it.
    pub fn to_wire(&self, separator: &[u8]) -> Vec<u8> {
        let total: usize = self.lines.iter().map(|l| l.byte_len() + separator.len()).sum();
        let mut out = Vec::with_capacity(total);
        for line in &self.lines {
            out.extend_from_slice(line.bytes());
            out.extend_from_slice(separator);
        }
        out
    }

    pub fn max_line_len(&self) -> usize {
        self.lines.iter().map(EncodedLine::byte_len).max().unwrap_or(0)
    }
}

/// Prepares model text for framing: drops non-whitespace control characters,
/// turns any whitespace run containing something other than a plain space
/// (newlines, tabs, no-break spaces) into one space, and trims both ends.
/// Lines never carry separators or NULs as a result.
pub fn normalize_reply(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run = String::new();
    let mut run_is_plain = true;
    for c in text.chars() {
        if c.is_whitespace() {
            run_is_plain &= c == ' ';
            run.push(c);
            continue;
        }
        if c.is_control() {
            continue;
        }
        if !run.is_empty() {
            if !out.is_empty() {
                if run_is_plain {
                    out.push_str(&run);
                } else {
                    out.push(' ');
                }
            }
            run.clear();
            run_is_plain = true;
        }
        out.push(c);
    }
    out
}

pub fn chunk_reply(
    text: &str,
    policy: &ChunkPolicy,
    encode_policy: EncodePolicy,
) -> Result<FramedReply, UnmappableCharacter> {
    let normalized = normalize_reply(text);
    let source = if normalized.is_empty() {
        normalize_reply(&policy.empty_reply_fallback)
    } else {
        normalized
    };
    let chars: Vec<char> = source.chars().collect();
    let max = policy.max_line_bytes.max(1);

    let mut spans = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let remaining = chars.len() - start;
        if remaining <= max {
            spans.push((start, chars.len(), BreakKind::End));
            break;
        }
        let limit = start + max;
        // A break at `pos` ends the line before the whitespace run at `pos`.
        let mut best: Option<(BreakKind, usize)> = None;
        for pos in start + 1..=limit {
            if chars[pos].is_whitespace() && !chars[pos - 1].is_whitespace() {
                let kind = policy.classify(chars[pos - 1]);
                if best.is_none_or(|(k, _)| kind >= k) {
                    best = Some((kind, pos));
                }
            }
        }
        match best {
            Some((kind, pos)) => {
                spans.push((start, pos, kind));
                start = pos;
                while start < chars.len() && chars[start].is_whitespace() {
                    start += 1;
                }
            }
            None => {
                spans.push((start, limit, BreakKind::Hard));
                start = limit;
            }
        }
    }

    let mut lines = Vec::with_capacity(spans.len());
    let mut break_kinds = Vec::with_capacity(spans.len());
    for (from, to, kind) in spans {
        let line: String = chars[from..to].iter().collect();
        let offset = |e: UnmappableCharacter| UnmappableCharacter { position: e.position + from, ..e };
        let bytes = codec::encode_text(&line, encode_policy).map_err(offset)?;
        debug_assert!(!bytes.is_empty() && bytes.len() <= max);
        lines.push(EncodedLine(bytes));
        break_kinds.push(kind);
    }
    Ok(FramedReply { lines, break_kinds })
}

/// Rejoins framed lines: directly after hard splits, with one space elsewhere.
pub fn reconstruct(reply: &FramedReply) -> String {
    let mut out = String::new();
    for (i, (line, kind)) in reply.lines.iter().zip(&reply.break_kinds).enumerate() {
        out.push_str(&line.text());
        let last = i + 1 == reply.lines.len();
        if !last && *kind != BreakKind::Hard {
            out.push(' ');
        }
    }
    out
}
