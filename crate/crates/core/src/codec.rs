//! Mac OS Roman transcoding.
//!
//! The mapping is total over all 256 byte values. The authoritative table is
//! `data/mac_roman.txt` (Apple's ROMAN.TXT, 1998 revision: 0xDB is EURO SIGN,
//! 0xF0 is the Apple logo at U+F8FF, control bytes map to themselves).

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

const TABLE_SOURCE: &str = include_str!("../data/mac_roman.txt");

/// A character with no Mac OS Roman code point, found under [`EncodePolicy::Reject`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("character {character:?} (U+{:04X}) at position {position} has no Mac OS Roman code point", *.character as u32)]
pub struct UnmappableCharacter {
    /// Character index (not byte offset) into the input text.
    pub position: usize,
    pub character: char,
}

/// What to do with characters that have no Mac OS Roman code point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodePolicy {
    Substitute(u8),
    Reject,
}

impl Default for EncodePolicy {
    fn default() -> Self {
        EncodePolicy::Substitute(b'?')
    }
}

/// Bytes in Mac OS Roman. Every byte decodes to exactly one character.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct MacRomanBytes(Vec<u8>);

impl MacRomanBytes {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn decode(&self) -> String {
        decode_bytes(&self.0)
    }

    /// Lowercase hex dump, two digits per byte, no separators.
    pub fn to_hex(&self) -> String {
        use fmt::Write;
        let mut out = String::with_capacity(self.0.len() * 2);
        for b in &self.0 {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

impl fmt::Debug for MacRomanBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacRomanBytes({:?})", self.decode())
    }
}

impl From<Vec<u8>> for MacRomanBytes {
    fn from(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }
}

impl AsRef<[u8]> for MacRomanBytes {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

struct Table {
    decode: [char; 256],
    encode: HashMap<char, u8>,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| parse_table(TABLE_SOURCE))
}

fn parse_table(src: &str) -> Table {
    let mut decode = ['\0'; 256];
    let mut seen = [false; 256];
    for line in src.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let byte = parse_hex(cols.next()).expect("mac_roman.txt: bad byte column");
        let scalar = parse_hex(cols.next()).expect("mac_roman.txt: bad scalar column");
        let byte = u8::try_from(byte).expect("mac_roman.txt: byte out of range");
        let ch = char::from_u32(scalar).expect("mac_roman.txt: scalar is not a char");
        assert!(!seen[byte as usize], "mac_roman.txt: duplicate entry for {byte:#04x}");
        seen[byte as usize] = true;
        decode[byte as usize] = ch;
    }
    assert!(seen.iter().all(|s| *s), "mac_roman.txt: table is not total");

    let mut encode = HashMap::with_capacity(256);
    for (b, ch) in decode.iter().enumerate() {
        let prev = encode.insert(*ch, b as u8);
        assert!(prev.is_none(), "mac_roman.txt: {ch:?} mapped twice");
    }
    Table { decode, encode }
}

fn parse_hex(col: Option<&str>) -> Option<u32> {
    let col = col?.trim();
    u32::from_str_radix(col.strip_prefix("0x").unwrap_or(col), 16).ok()
}

/// Decodes one byte. Total.
pub fn decode_byte(b: u8) -> char {
    table().decode[b as usize]
}

/// Decodes bytes; output has exactly one character per input byte.
pub fn decode_bytes(bytes: &[u8]) -> String {
    let t = table();
    bytes.iter().map(|b| t.decode[*b as usize]).collect()
}

pub fn encode_char(c: char) -> Option<u8> {
    if c.is_ascii() {
        return Some(c as u8);
    }
    table().encode.get(&c).copied()
}

pub fn is_encodable(c: char) -> bool {
    encode_char(c).is_some()
}

/// Encodes text to Mac OS Roman, one byte per character.
pub fn encode_text(text: &str, policy: EncodePolicy) -> Result<MacRomanBytes, UnmappableCharacter> {
    let mut out = Vec::with_capacity(text.len());
    for (position, character) in text.chars().enumerate() {
        match (encode_char(character), policy) {
            (Some(b), _) => out.push(b),
            (None, EncodePolicy::Substitute(sub)) => out.push(sub),
            (None, EncodePolicy::Reject) => {
                return Err(UnmappableCharacter { position, character });
            }
        }
    }
    Ok(MacRomanBytes(out))
}
