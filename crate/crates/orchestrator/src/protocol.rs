//! Wire messages. One JSON object per line; see the crate docs for the field list.

use std::fmt;
use std::str::FromStr;

use affect_core::engine::EmotionEvent;
use affect_core::fusion::Expression;
use affect_core::signal::{Quadrant, SampleBlock, SignalKind};
use serde::{Deserialize, Serialize};

use crate::error::{OrchestratorError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Neutral,
    Empathetic,
}

impl FromStr for Mode {
    type Err = OrchestratorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neutral" => Ok(Mode::Neutral),
            "empathetic" => Ok(Mode::Empathetic),
            other => Err(OrchestratorError::protocol(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Neutral => "neutral",
            Mode::Empathetic => "empathetic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Message {
    // Client to server.
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<Mode>,
    },
    NextTopic,
    SpeechStart,
    SpeechEnd,
    Samples {
        kind: SignalKind,
        start_time: f64,
        sample_rate: f64,
        channels: Vec<String>,
        data: Vec<Vec<f64>>,
    },
    // Either direction: clients may push events computed elsewhere, and a
    // server with models pushes the events it recognises from `Samples`.
    EmotionEvent {
        event: EmotionEvent,
    },
    EndSession,
    // Server to client.
    Welcome {
        mode: Mode,
        topics: Vec<Quadrant>,
    },
    StartTopic {
        index: usize,
        category: Quadrant,
    },
    Prompt {
        text: String,
    },
    ExpressionCommand {
        expression: Expression,
    },
    ResponseUtterance {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quadrant_used: Option<Quadrant>,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Message {
    pub fn samples(block: &SampleBlock) -> Self {
        Message::Samples {
            kind: block.kind(),
            start_time: block.start_time(),
            sample_rate: block.sample_rate(),
            channels: block.channels().to_vec(),
            data: block.data().to_vec(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "Hello",
            Message::NextTopic => "NextTopic",
            Message::SpeechStart => "SpeechStart",
            Message::SpeechEnd => "SpeechEnd",
            Message::Samples { .. } => "Samples",
            Message::EmotionEvent { .. } => "EmotionEvent",
            Message::EndSession => "EndSession",
            Message::Welcome { .. } => "Welcome",
            Message::StartTopic { .. } => "StartTopic",
            Message::Prompt { .. } => "Prompt",
            Message::ExpressionCommand { .. } => "ExpressionCommand",
            Message::ResponseUtterance { .. } => "ResponseUtterance",
            Message::Error { .. } => "Error",
        }
    }
}

/// Every line on the wire: session id, stream time in seconds, and the message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub session: String,
    pub t: f64,
    #[serde(flatten)]
    pub message: Message,
}

impl Envelope {
    pub fn new(session: impl Into<String>, t: f64, message: Message) -> Self {
        Self {
            session: session.into(),
            t,
            message,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let env: Envelope =
            serde_json::from_str(line).map_err(|e| OrchestratorError::protocol(format!("malformed message: {e}")))?;
        if !env.t.is_finite() {
            return Err(OrchestratorError::protocol("message time must be finite"));
        }
        Ok(env)
    }
}
