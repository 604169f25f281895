//! Validates share-directory files against the wire format.
//!
//! Input: empty, or one line of Mac OS Roman with an optional trailing CR.
//! Output: empty, or one or more non-empty lines, each terminated by CR and
//! no longer than the line budget. Neither file may contain LF or NUL.

use std::fmt;

use bridge_core::exchange::MAX_INPUT_BYTES;
use bridge_core::share::LINE_SEPARATOR;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LineFeed { offset: usize },
    Nul { offset: usize },
    InputMultipleLines,
    InputTooLong { len: usize },
    OutputUnterminated,
    OutputEmptyLine { line: usize },
    OutputLineTooLong { line: usize, len: usize, max: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LineFeed { offset } => write!(f, "LF byte at offset {offset}"),
            Violation::Nul { offset } => write!(f, "NUL byte at offset {offset}"),
            Violation::InputMultipleLines => write!(f, "input holds more than one line"),
            Violation::InputTooLong { len } => write!(f, "input is {len} bytes (max {MAX_INPUT_BYTES})"),
            Violation::OutputUnterminated => write!(f, "output does not end with CR"),
            Violation::OutputEmptyLine { line } => write!(f, "output line {line} is empty"),
            Violation::OutputLineTooLong { line, len, max } => {
                write!(f, "output line {line} is {len} bytes (max {max})")
            }
        }
    }
}

fn forbidden_bytes(bytes: &[u8]) -> Vec<Violation> {
    bytes
        .iter()
        .enumerate()
        .filter_map(|(offset, b)| match b {
            b'\n' => Some(Violation::LineFeed { offset }),
            0 => Some(Violation::Nul { offset }),
            _ => None,
        })
        .collect()
}

pub fn check_input(bytes: &[u8]) -> Vec<Violation> {
    let mut v = forbidden_bytes(bytes);
    let body = bytes.strip_suffix(&[LINE_SEPARATOR]).unwrap_or(bytes);
    if body.contains(&LINE_SEPARATOR) {
        v.push(Violation::InputMultipleLines);
    }
    if bytes.len() > MAX_INPUT_BYTES {
        v.push(Violation::InputTooLong { len: bytes.len() });
    }
    v
}

pub fn check_output(bytes: &[u8], max_line_bytes: usize) -> Vec<Violation> {
    let mut v = forbidden_bytes(bytes);
    if bytes.is_empty() {
        return v;
    }
    let Some(body) = bytes.strip_suffix(&[LINE_SEPARATOR]) else {
        v.push(Violation::OutputUnterminated);
        return v;
    };
    for (i, line) in body.split(|b| *b == LINE_SEPARATOR).enumerate() {
        if line.is_empty() {
            v.push(Violation::OutputEmptyLine { line: i + 1 });
        } else if line.len() > max_line_bytes {
            v.push(Violation::OutputLineTooLong { line: i + 1, len: line.len(), max: max_line_bytes });
        }
    }
    v
}
