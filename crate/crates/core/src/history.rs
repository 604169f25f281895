//! Conversation state: a fixed priming prefix plus a sliding window of rounds.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_WINDOW_ROUNDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid role {0:?} (expected system, user or assistant)")]
pub struct InvalidRole(pub String);

impl FromStr for Role {
    type Err = InvalidRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(Role::System),
            "user" => Ok(Role::User),
            "assistant" => Ok(Role::Assistant),
            other => Err(InvalidRole(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

/// One completed user/assistant exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub user: ChatMessage,
    pub assistant: ChatMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TurnError {
    #[error("a turn is already open")]
    TurnAlreadyOpen,
    #[error("no turn is open")]
    NoOpenTurn,
}

/// Priming messages are fixed at construction; completed rounds beyond the
/// window are dropped oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatHistory {
    priming: Vec<ChatMessage>,
    rounds: VecDeque<Round>,
    window_rounds: usize,
    pending_user: Option<ChatMessage>,
}

impl ChatHistory {
    /// `window_rounds` is clamped to at least 1.
    pub fn new(priming: Vec<ChatMessage>, window_rounds: usize) -> Self {
        let window_rounds = window_rounds.max(1);
        Self {
            priming,
            rounds: VecDeque::with_capacity(window_rounds + 1),
            window_rounds,
            pending_user: None,
        }
    }

    pub fn priming(&self) -> &[ChatMessage] {
        &self.priming
    }

    pub fn rounds(&self) -> impl ExactSizeIterator<Item = &Round> {
        self.rounds.iter()
    }

    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn window_rounds(&self) -> usize {
        self.window_rounds
    }

    pub fn pending_user(&self) -> Option<&ChatMessage> {
        self.pending_user.as_ref()
    }

    pub fn has_open_turn(&self) -> bool {
        self.pending_user.is_some()
    }

    pub fn begin_turn(&mut self, user_text: impl Into<String>) -> Result<(), TurnError> {
        if self.pending_user.is_some() {
            return Err(TurnError::TurnAlreadyOpen);
        }
        self.pending_user = Some(ChatMessage::user(user_text));
        Ok(())
    }

    pub fn complete_turn(&mut self, assistant_text: impl Into<String>) -> Result<(), TurnError> {
        let user = self.pending_user.take().ok_or(TurnError::NoOpenTurn)?;
        self.rounds.push_back(Round { user, assistant: ChatMessage::assistant(assistant_text) });
        while self.rounds.len() > self.window_rounds {
            self.rounds.pop_front();
        }
        Ok(())
    }

    /// Discards the open turn, leaving rounds untouched.
    pub fn abort_turn(&mut self) -> Result<ChatMessage, TurnError> {
        self.pending_user.take().ok_or(TurnError::NoOpenTurn)
    }

    /// Priming, then each round as user/assistant, then the pending user message.
    pub fn render_messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(self.priming.len() + 2 * self.rounds.len() + 1);
        out.extend(self.priming.iter().cloned());
        for round in &self.rounds {
            out.push(round.user.clone());
            out.push(round.assistant.clone());
        }
        out.extend(self.pending_user.iter().cloned());
        out
    }
}
