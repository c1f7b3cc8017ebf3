//! Dialog orchestration for an empathetic conversational agent.
//!
//! A session walks through eight topics. For each topic the server sends a
//! prompt, listens while the user speaks, and replies from a response
//! database. In empathetic mode it also mirrors every recognised emotion as a
//! facial-expression command and keys the reply on the quadrant recognised
//! most often during the utterance. Neutral mode sends no expressions and
//! neutral replies.
//!
//! # Wire protocol
//!
//! Newline-delimited JSON over TCP, UTF-8, one connection per session. Every
//! line is an object with:
//!
//! - `session`: session id chosen by the client in `Hello`
//! - `t`: stream time in seconds; client times must not decrease
//! - `type`: message name, plus the fields listed below
//!
//! Client to server:
//!
//! | type           | fields                                              | legal in phase          |
//! |----------------|-----------------------------------------------------|-------------------------|
//! | `Hello`        | `mode`? (`neutral` / `empathetic`)                  | first line only         |
//! | `NextTopic`    |                                                     | Idle, Responding        |
//! | `SpeechStart`  |                                                     | Prompting               |
//! | `SpeechEnd`    |                                                     | Listening               |
//! | `EmotionEvent` | `event`: state, window, per_modality, latency_ms    | any but Done            |
//! | `Samples`      | `kind`, `start_time`, `sample_rate`, `channels`, `data` (rows per channel) | any but Done; server needs models |
//! | `EndSession`   |                                                     | any but Done            |
//!
//! Server to client:
//!
//! | type                | fields                          | sent                                  |
//! |---------------------|---------------------------------|---------------------------------------|
//! | `Welcome`           | `mode`, `topics`                | after `Hello`                         |
//! | `StartTopic`        | `index`, `category`             | after `NextTopic`                     |
//! | `Prompt`            | `text`                          | right after `StartTopic`              |
//! | `EmotionEvent`      | `event`                         | per window recognised from `Samples`  |
//! | `ExpressionCommand` | `expression`                    | per emotion event, empathetic only    |
//! | `ResponseUtterance` | `text`, `quadrant_used`?        | after `SpeechEnd`                     |
//! | `EndSession`        |                                 | after the last topic or on request    |
//! | `Error`             | `code`, `message`               | for a rejected line; state unchanged  |
//!
//! Phases run `Idle -> Prompting -> Listening -> Responding -> (Prompting | Done)`.

pub mod drive;
pub mod error;
pub mod protocol;
pub mod responses;
pub mod server;
pub mod session;

pub use drive::{drive_trial, TranscriptLine};
pub use error::{OrchestratorError, Result};
pub use protocol::{Envelope, Message, Mode};
pub use responses::ResponseDb;
pub use server::{serve, ServerConfig};
pub use session::{topic_order, Phase, Session, SessionConfig, SessionState, FALLBACK_QUADRANT, TOPIC_COUNT};
