#![allow(dead_code)]

use affect_core::engine::{EmotionEvent, Window};
use affect_core::fusion::{majority_emotion, quadrant_levels, EmotionState, RawScores};
use affect_core::signal::Quadrant;
use affect_orchestrator::{Envelope, Message, Mode};

pub fn event(q: Quadrant, t: f64) -> EmotionEvent {
    let (a, v) = quadrant_levels(q);
    EmotionEvent {
        state: EmotionState::from_levels(
            a,
            v,
            RawScores {
                arousal: a.as_f64() * 3.0,
                valence: v.as_f64(),
            },
            t,
        ),
        window: Window { start: t - 20.0, end: t },
        per_modality: Vec::new(),
        latency_ms: 1.5,
    }
}

/// A full eight-topic session with events before, during and after each utterance.
/// Returns the client lines and the quadrant each reply should use.
pub fn full_session(id: &str, mode: Option<Mode>) -> (Vec<Envelope>, Vec<Quadrant>) {
    let mut out = vec![Envelope::new(id, 0.0, Message::Hello { mode })];
    let mut expected = Vec::new();
    let mut t = 0.0;
    for topic in 0..8usize {
        out.push(Envelope::new(id, t, Message::NextTopic));
        t += 5.0;
        out.push(Envelope::new(id, t, Message::EmotionEvent { event: event(Quadrant::LALV, t) }));
        out.push(Envelope::new(id, t, Message::SpeechStart));
        let during: Vec<Quadrant> = (0..=topic % 4)
            .map(|k| Quadrant::ALL[(topic + k * (topic % 3)) % 4])
            .collect();
        let states: Vec<_> = during.iter().map(|q| event(*q, 0.0).state).collect();
        expected.push(majority_emotion(&states).unwrap());
        for q in during {
            t += 5.0;
            out.push(Envelope::new(id, t, Message::EmotionEvent { event: event(q, t) }));
        }
        t += 1.0;
        out.push(Envelope::new(id, t, Message::SpeechEnd));
        t += 1.0;
        out.push(Envelope::new(id, t, Message::EmotionEvent { event: event(Quadrant::HAHV, t) }));
    }
    out.push(Envelope::new(id, t + 1.0, Message::NextTopic));
    (out, expected)
}

pub fn count(replies: &[Envelope], type_name: &str) -> usize {
    replies.iter().filter(|e| e.message.type_name() == type_name).count()
}
