//! Per-session dialog state machine.
//!
//! Phases move `Idle -> Prompting -> Listening -> Responding -> (Prompting | Done)`.
//! Every handler checks legality before touching state, so a rejected message
//! leaves the session exactly as it was.

use std::collections::HashMap;
use std::sync::Arc;

use affect_core::engine::EmotionEvent;
use affect_core::fusion::{majority_emotion, EmotionState};
use affect_core::signal::Quadrant;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OrchestratorError, Result};
use crate::protocol::{Envelope, Message, Mode};
use crate::responses::{ResponseDb, Section};

/// Topics per session: two from each category.
pub const TOPIC_COUNT: usize = 8;

/// Quadrant used when a reply is due but nothing was ever recognised.
pub const FALLBACK_QUADRANT: Quadrant = Quadrant::LAHV;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Prompting,
    Listening,
    Responding,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub session_id: String,
    pub mode: Mode,
    pub topic_index: Option<usize>,
    pub topic_category: Option<Quadrant>,
    pub phase: Phase,
    pub speech_emotions: Vec<EmotionState>,
    pub latest_state: Option<EmotionState>,
    pub last_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub mode: Mode,
    pub seed: u64,
    pub shuffle_topics: bool,
    /// Explicit topic order; overrides the default and the shuffle.
    pub topics: Option<Vec<Quadrant>>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Empathetic,
            seed: 0,
            shuffle_topics: false,
            topics: None,
        }
    }
}

/// Two topics per category, interleaved; shuffled with `seed` when asked.
pub fn topic_order(seed: u64, shuffle: bool) -> Vec<Quadrant> {
    let mut order: Vec<Quadrant> = Quadrant::ALL.into_iter().chain(Quadrant::ALL).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

fn section_code(s: &Section) -> u64 {
    match s {
        Section::Prompt(c) => *c as u64,
        Section::Neutral(c) => 4 + *c as u64,
        Section::Empathetic(c, d) => 8 + 4 * *c as u64 + *d as u64,
    }
}

/// Round-robin over each list, starting at a seeded offset.
#[derive(Debug, Clone)]
struct Selector {
    seed: u64,
    cursors: HashMap<Section, usize>,
}

impl Selector {
    fn next<'a>(&mut self, db: &'a ResponseDb, section: Section) -> &'a str {
        let list = db.entries(&section);
        let seed = self.seed;
        let cursor = self.cursors.entry(section.clone()).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(section_code(&section));
            rng.random_range(0..list.len())
        });
        let text = &list[*cursor % list.len()];
        *cursor += 1;
        text
    }
}

pub struct Session {
    state: SessionState,
    topics: Vec<Quadrant>,
    db: Arc<ResponseDb>,
    selector: Selector,
}

impl Session {
    pub fn new(session_id: impl Into<String>, config: &SessionConfig, db: Arc<ResponseDb>) -> Result<Self> {
        let topics = match &config.topics {
            Some(t) if t.is_empty() => return Err(OrchestratorError::protocol("topic list is empty")),
            Some(t) => t.clone(),
            None => topic_order(config.seed, config.shuffle_topics),
        };
        Ok(Self {
            state: SessionState {
                session_id: session_id.into(),
                mode: config.mode,
                topic_index: None,
                topic_category: None,
                phase: Phase::Idle,
                speech_emotions: Vec::new(),
                latest_state: None,
                last_t: f64::NEG_INFINITY,
            },
            topics,
            db,
            selector: Selector {
                seed: config.seed,
                cursors: HashMap::new(),
            },
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn topics(&self) -> &[Quadrant] {
        &self.topics
    }

    pub fn id(&self) -> &str {
        &self.state.session_id
    }

    fn require(&self, allowed: &[Phase], what: &str) -> Result<()> {
        if allowed.contains(&self.state.phase) {
            Ok(())
        } else {
            Err(OrchestratorError::protocol(format!(
                "{what} is not allowed in phase {:?}",
                self.state.phase
            )))
        }
    }

    /// Expression command (empathetic mode only); accumulates while listening.
    pub fn on_emotion_event(&mut self, event: &EmotionEvent) -> Result<Option<Message>> {
        self.require(
            &[Phase::Idle, Phase::Prompting, Phase::Listening, Phase::Responding],
            "EmotionEvent",
        )?;
        self.state.latest_state = Some(event.state);
        if self.state.phase == Phase::Listening {
            self.state.speech_emotions.push(event.state);
        }
        Ok(match self.state.mode {
            Mode::Empathetic => Some(Message::ExpressionCommand {
                expression: event.state.expression,
            }),
            Mode::Neutral => None,
        })
    }

    pub fn on_speech_start(&mut self) -> Result<()> {
        self.require(&[Phase::Prompting], "SpeechStart")?;
        self.state.speech_emotions.clear();
        self.state.phase = Phase::Listening;
        Ok(())
    }

    /// The reply to the utterance that just ended.
    pub fn on_speech_end(&mut self) -> Result<Message> {
        self.require(&[Phase::Listening], "SpeechEnd")?;
        let category = self.state.topic_category.expect("a topic is active while listening");
        let msg = match self.state.mode {
            Mode::Empathetic => {
                let quadrant = majority_emotion(&self.state.speech_emotions)
                    .ok()
                    .or(self.state.latest_state.map(|s| s.quadrant))
                    .unwrap_or(FALLBACK_QUADRANT);
                Message::ResponseUtterance {
                    text: self.selector.next(&self.db, Section::Empathetic(category, quadrant)).to_string(),
                    quadrant_used: Some(quadrant),
                }
            }
            Mode::Neutral => Message::ResponseUtterance {
                text: self.selector.next(&self.db, Section::Neutral(category)).to_string(),
                quadrant_used: None,
            },
        };
        self.state.phase = Phase::Responding;
        Ok(msg)
    }

    /// Starts the next topic (`StartTopic` then `Prompt`) or ends the session.
    pub fn advance_topic(&mut self) -> Result<Vec<Message>> {
        self.require(&[Phase::Idle, Phase::Responding], "NextTopic")?;
        let next = self.state.topic_index.map_or(0, |i| i + 1);
        if next >= self.topics.len() {
            self.finish();
            return Ok(vec![Message::EndSession]);
        }
        let category = self.topics[next];
        self.state.topic_index = Some(next);
        self.state.topic_category = Some(category);
        self.state.phase = Phase::Prompting;
        let text = self.selector.next(&self.db, Section::Prompt(category)).to_string();
        Ok(vec![Message::StartTopic { index: next, category }, Message::Prompt { text }])
    }

    fn finish(&mut self) {
        self.state.phase = Phase::Done;
        self.state.speech_emotions.clear();
    }

    /// Applies one client message and returns the server's replies.
    pub fn handle(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        if env.session != self.state.session_id {
            return Err(OrchestratorError::protocol(format!("unknown session `{}`", env.session)));
        }
        if self.state.phase == Phase::Done {
            return Err(OrchestratorError::protocol("session has ended"));
        }
        if env.t < self.state.last_t {
            return Err(OrchestratorError::protocol(format!(
                "time went backwards: {} after {}",
                env.t, self.state.last_t
            )));
        }
        let replies = match &env.message {
            Message::NextTopic => self.advance_topic()?,
            Message::SpeechStart => {
                self.on_speech_start()?;
                Vec::new()
            }
            Message::SpeechEnd => vec![self.on_speech_end()?],
            Message::EmotionEvent { event } => self.on_emotion_event(event)?.into_iter().collect(),
            Message::EndSession => {
                self.finish();
                vec![Message::EndSession]
            }
            Message::Hello { .. } => return Err(OrchestratorError::protocol("session already started")),
            other => {
                return Err(OrchestratorError::protocol(format!(
                    "{} is not accepted from clients here",
                    other.type_name()
                )))
            }
        };
        self.state.last_t = env.t;
        Ok(replies
            .into_iter()
            .map(|m| Envelope::new(self.state.session_id.clone(), env.t, m))
            .collect())
    }
}
