//! Shared-folder chat bridge between a classic-Mac style guest console and an
//! OpenAI-compatible inference server.
//!
//! The host polls a single-line Mac OS Roman input file, sends the
//! conversation to the model, frames the reply into byte-bounded lines and
//! publishes them to an output file. [`guest`] is the counterparty.

pub mod chunker;
pub mod client;
pub mod codec;
pub mod exchange;
pub mod faultfs;
pub mod guest;
pub mod history;
pub(crate) mod millis;
pub mod share;
pub mod transcript;

pub use chunker::{chunk_reply, reconstruct, BreakKind, ChunkPolicy, EncodedLine, FramedReply};
pub use client::{build_request, ChatClient, GenerationConfig, GenerationError, GenerationRequest, GenerationResult};
pub use codec::{decode_bytes, encode_text, is_encodable, EncodePolicy, MacRomanBytes, UnmappableCharacter};
pub use exchange::{await_input, publish_reply, Exchange, ExchangeError, ExchangeSettings, PollPolicy, Shutdown, TurnOutcome, TurnRecord};
pub use guest::{poll_reply, run_console, send_input, GuestError, GuestPolicy, GuestReply, InputMode, PollOutcome};
pub use history::{ChatHistory, ChatMessage, Role, Round, TurnError};
pub use share::{RealFs, SharePaths, ShareFs};
