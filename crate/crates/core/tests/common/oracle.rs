//! Independent reference checks for framing. Nothing here calls the chunker's
//! internals; it only inspects the emitted lines.

use bridge_core::{BreakKind, FramedReply};

pub const SENTENCE: &[char] = &['.', '!', '?', '…'];
pub const CLAUSE: &[char] = &[',', ';', ':'];

/// Expected source text after cleanup: control characters other than
/// whitespace removed, whitespace runs that are not pure spaces become one
/// space, ends trimmed.
pub fn clean(text: &str) -> Vec<char> {
    let kept: Vec<char> = text.chars().filter(|c| c.is_whitespace() || !c.is_control()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < kept.len() {
        if kept[i].is_whitespace() {
            let j = (i..kept.len()).find(|&j| !kept[j].is_whitespace()).unwrap_or(kept.len());
            let run = &kept[i..j];
            if !out.is_empty() && j < kept.len() {
                if run.iter().all(|&c| c == ' ') {
                    out.extend_from_slice(run);
                } else {
                    out.push(' ');
                }
            }
            i = j;
        } else {
            out.push(kept[i]);
            i += 1;
        }
    }
    out
}

fn rank(c: char) -> u8 {
    if SENTENCE.contains(&c) {
        3
    } else if CLAUSE.contains(&c) {
        2
    } else {
        1
    }
}

fn kind_rank(k: BreakKind) -> u8 {
    match k {
        BreakKind::SentencePunct => 3,
        BreakKind::ClausePunct => 2,
        BreakKind::Whitespace => 1,
        BreakKind::Hard => 0,
        BreakKind::End => 4,
    }
}

/// Every legal break inside the longest prefix of `chars[start..]` holding at
/// most `max` characters: a position whose character is whitespace and whose
/// predecessor is not. Each comes with its priority.
pub fn legal_breaks(chars: &[char], start: usize, max: usize) -> Vec<(u8, usize)> {
    let end = (start + max).min(chars.len() - 1);
    (start + 1..=end)
        .filter(|&p| chars[p].is_whitespace() && !chars[p - 1].is_whitespace())
        .map(|p| (rank(chars[p - 1]), p))
        .collect()
}

/// Checks `reply` against the source `text` and a byte budget `max` (all test
/// characters are single-byte in Mac OS Roman). Verifies line bounds, the
/// greedy/priority rule for every line, whitespace consumption and the
/// reconstruct contract.
pub fn check_framing(text: &str, max: usize, fallback: &str, reply: &FramedReply) -> Result<(), String> {
    let mut chars = clean(text);
    if chars.is_empty() {
        chars = clean(fallback);
    }
    let lines = reply.lines();
    let kinds = reply.break_kinds();
    if lines.is_empty() || lines.len() != kinds.len() {
        return Err(format!("{} lines, {} kinds", lines.len(), kinds.len()));
    }
    let mut pos = 0;
    let mut rebuilt = String::new();
    for (i, (line, &kind)) in lines.iter().zip(kinds).enumerate() {
        let len = line.byte_len();
        if len == 0 || len > max {
            return Err(format!("line {i} has {len} bytes, budget {max}"));
        }
        let text: Vec<char> = line.text().chars().collect();
        if chars.get(pos..pos + text.len()) != Some(&text[..]) {
            return Err(format!("line {i} {:?} does not continue the source at {pos}", line.text()));
        }
        let last = i + 1 == lines.len();
        let remaining = chars.len() - pos;
        if last {
            if kind != BreakKind::End || remaining != text.len() || remaining > max {
                return Err(format!("last line {i}: kind {kind:?}, {remaining} chars left"));
            }
        } else {
            if remaining <= max {
                return Err(format!("line {i} broke although the rest fits"));
            }
            let breaks = legal_breaks(&chars, pos, max);
            let best = breaks.iter().copied().max();
            let end = pos + text.len();
            match best {
                Some((r, p)) => {
                    if kind == BreakKind::Hard {
                        return Err(format!("line {i} took a hard break with {} legal breaks", breaks.len()));
                    }
                    if p != end || r != kind_rank(kind) {
                        return Err(format!("line {i} ended at {end} ({kind:?}), best break is {p} (rank {r})"));
                    }
                }
                None => {
                    if kind != BreakKind::Hard || text.len() != max {
                        return Err(format!("line {i} should be a hard split of {max}"));
                    }
                }
            }
        }
        rebuilt.extend(&text);
        pos += text.len();
        if !last && kind != BreakKind::Hard {
            let skip = chars[pos..].iter().take_while(|c| c.is_whitespace()).count();
            if skip == 0 {
                return Err(format!("line {i} break not followed by whitespace"));
            }
            pos += skip;
            rebuilt.push(' ');
        }
    }
    let expected = collapse_breaks(&chars, reply);
    if bridge_core::reconstruct(reply) != rebuilt || rebuilt != expected {
        return Err("reconstruct contract violated".into());
    }
    Ok(())
}

/// The cleaned source with the whitespace run at each non-hard break
/// collapsed to a single space.
fn collapse_breaks(chars: &[char], reply: &FramedReply) -> String {
    let mut out = String::new();
    let mut pos = 0;
    for (line, &kind) in reply.lines().iter().zip(reply.break_kinds()) {
        let n = line.text().chars().count();
        out.extend(&chars[pos..pos + n]);
        pos += n;
        if kind != BreakKind::Hard && kind != BreakKind::End {
            out.push(' ');
            while pos < chars.len() && chars[pos].is_whitespace() {
                pos += 1;
            }
        }
    }
    out
}
