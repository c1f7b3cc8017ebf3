//! In-process session driven by a replayed trial, without a socket.

use std::sync::Arc;

use affect_core::engine::{replay, EngineConfig, Speed};
use affect_core::model::ModelSet;
use affect_core::signal::TrialRecord;

use crate::error::Result;
use crate::protocol::{Envelope, Message};
use crate::responses::ResponseDb;
use crate::session::{Session, SessionConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptLine {
    pub from_client: bool,
    pub envelope: Envelope,
}

/// Runs one topic for `trial`: prompt, the first speech span with the
/// engine's events interleaved by stream time, the reply, then the session end.
/// Events at exactly a span boundary count as inside the span.
pub fn drive_trial(
    trial: &TrialRecord,
    engine_config: &EngineConfig,
    models: Arc<ModelSet>,
    session_config: &SessionConfig,
    db: Arc<ResponseDb>,
) -> Result<Vec<TranscriptLine>> {
    let events = replay(trial, engine_config, models, Speed::Max)?;
    let id = trial.trial_id().to_string();
    let config = SessionConfig {
        topics: Some(vec![trial.topic_category()]),
        ..session_config.clone()
    };
    let mut session = Session::new(id.clone(), &config, db)?;
    if trial.speech_spans().len() > 1 {
        log::warn!("{id}: only the first of {} speech spans is used", trial.speech_spans().len());
    }

    let mut script: Vec<(f64, u8, Message)> = vec![(0.0, 0, Message::NextTopic)];
    if let Some(span) = trial.speech_spans().first() {
        script.push((span.start, 0, Message::SpeechStart));
        script.push((span.end, 2, Message::SpeechEnd));
    }
    for event in events {
        script.push((event.state.timestamp, 1, Message::EmotionEvent { event }));
    }
    let end = script.iter().map(|(t, _, _)| *t).fold(trial.end_time(), f64::max);
    script.push((end, 3, Message::NextTopic));
    // Stable by time, then SpeechStart < events < SpeechEnd < closing NextTopic.
    script.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut transcript = Vec::new();
    for (t, _, message) in script {
        let env = Envelope::new(id.clone(), t, message);
        let replies = session.handle(&env)?;
        transcript.push(TranscriptLine {
            from_client: true,
            envelope: env,
        });
        transcript.extend(replies.into_iter().map(|envelope| TranscriptLine {
            from_client: false,
            envelope,
        }));
    }
    Ok(transcript)
}
