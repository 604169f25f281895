//! Style-priming fixture: a JSON list of `{"role": ..., "content": ...}`.

use std::path::Path;

use bridge_core::history::{ChatMessage, Role};
use serde::Deserialize;
use thiserror::Error;

/// Illustrative casual-register priming used when no file is configured.
pub const EXAMPLE_PRIMING: &str = include_str!("../fixtures/priming.example.json");

#[derive(Debug, Error)]
pub enum PrimingError {
    #[error("cannot read priming file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("priming parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("priming message {index} has invalid role {role:?}")]
    InvalidRole { index: usize, role: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMessage {
    role: String,
    content: String,
}

pub fn parse_priming(text: &str) -> Result<Vec<ChatMessage>, PrimingError> {
    let raw: Vec<RawMessage> = serde_json::from_str(text).map_err(|e| PrimingError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.into_iter()
        .enumerate()
        .map(|(index, m)| {
            let role: Role = m.role.parse().map_err(|_| PrimingError::InvalidRole { index, role: m.role.clone() })?;
            Ok(ChatMessage::new(role, m.content))
        })
        .collect()
}

pub fn load_priming(path: &Path) -> Result<Vec<ChatMessage>, PrimingError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| PrimingError::Io { path: path.display().to_string(), source })?;
    parse_priming(&text)
}

pub fn example_priming() -> Vec<ChatMessage> {
    parse_priming(EXAMPLE_PRIMING).expect("bundled priming fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_list_is_allowed() {
        assert!(parse_priming("[]").unwrap().is_empty());
    }

    #[test]
    fn order_is_preserved() {
        let text = r#"[
            {"role": "system", "content": "s"},
            {"role": "user", "content": "u1"},
            {"role": "assistant", "content": "a1"},
            {"role": "user", "content": "u2"}
        ]"#;
        let msgs = parse_priming(text).unwrap();
        let contents: Vec<_> = msgs.iter().map(|m| m.content.as_str()).collect();
        assert_eq!(contents, ["s", "u1", "a1", "u2"]);
        assert_eq!(msgs[2].role, Role::Assistant);
    }

    #[test]
    fn invalid_role() {
        let err = parse_priming(r#"[{"role": "narrator", "content": "x"}]"#).unwrap_err();
        assert!(matches!(err, PrimingError::InvalidRole { index: 0, ref role } if role == "narrator"));
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_priming("[\n  {\"role\": \"user\",\n  }\n]").unwrap_err();
        match err {
            PrimingError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bundled_example_parses() {
        let msgs = example_priming();
        assert!(!msgs.is_empty());
        assert_eq!(msgs[0].role, Role::System);
    }
}
