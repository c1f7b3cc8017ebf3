//! Streaming ingestion and sliding-window recognition driven by stream time.
//!
//! Ticks fall on multiples of the hop, counted from t = 0. The tick at `t`
//! analyses `[t - window, t)` of every buffered stream, so the first event is
//! at `t = window` and a stream of duration `D` yields
//! `floor((D - window) / hop) + 1` events.

mod buffer;
mod config;
mod pipeline;
mod replay;

pub use buffer::StreamBuffer;
pub use config::{EngineConfig, MIN_WINDOW_SECONDS};
pub use pipeline::{is_data_shortfall, predict_window, slice_window, window_features};
pub use replay::{classify_trial, read_event_log, replay, replay_with, write_event_log, Clock, ManualClock, Speed, WallClock};

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{EmotionState, SessionFuser};
use crate::model::{ModalityPrediction, ModelSet};
use crate::signal::{SampleBlock, SignalKind, TIME_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

/// One recognition result, emitted every hop once a full window is buffered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEvent {
    pub state: EmotionState,
    pub window: Window,
    pub per_modality: Vec<ModalityPrediction>,
    /// Wall-clock compute time of the window.
    pub latency_ms: f64,
}

impl EmotionEvent {
    /// Equality on everything except the measured latency.
    pub fn same_content(&self, other: &EmotionEvent) -> bool {
        self.state == other.state && self.window == other.window && self.per_modality == other.per_modality
    }
}

/// Index of the first hop boundary at or after `t`.
fn hop_index_at_or_after(t: f64, hop: f64) -> u64 {
    ((t / hop) - 1e-9).ceil().max(0.0) as u64
}

pub struct Engine {
    config: EngineConfig,
    models: Arc<ModelSet>,
    buffers: BTreeMap<SignalKind, StreamBuffer>,
    fuser: SessionFuser,
    next_hop: u64,
}

impl Engine {
    pub fn new(config: EngineConfig, models: Arc<ModelSet>) -> Result<Self> {
        config.validate()?;
        if models.valence_mode() != config.valence_mode {
            return Err(Error::Config(format!(
                "models were trained with valence mode {:?}, config asks for {:?}",
                models.valence_mode(),
                config.valence_mode
            )));
        }
        let buffers = SignalKind::ALL
            .into_iter()
            .map(|k| StreamBuffer::new(k, config.capacity_seconds).map(|b| (k, b)))
            .collect::<Result<_>>()?;
        Ok(Self {
            fuser: SessionFuser::new(config.fusion)?,
            next_hop: hop_index_at_or_after(config.window_seconds, config.hop_seconds),
            config,
            models,
            buffers,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn buffer(&self, kind: SignalKind) -> &StreamBuffer {
        &self.buffers[&kind]
    }

    pub fn ingest(&mut self, block: SampleBlock) -> Result<()> {
        self.buffers
            .get_mut(&block.kind())
            .expect("a buffer exists for every kind")
            .ingest(block)
    }

    /// Stream time up to which every stream that has delivered data is complete.
    pub fn watermark(&self) -> Option<f64> {
        self.buffers
            .values()
            .filter_map(StreamBuffer::watermark)
            .min_by(f64::total_cmp)
    }

    /// Time of the next hop boundary that will produce a tick.
    pub fn next_tick_time(&self) -> f64 {
        self.next_hop as f64 * self.config.hop_seconds
    }

    /// Analyses the window ending at `t`, which must be the next hop boundary
    /// (or a later one; skipped boundaries produce no events). Returns `None`
    /// while no stream holds a full window.
    pub fn tick(&mut self, t: f64) -> Result<Option<EmotionEvent>> {
        let hop = self.config.hop_seconds;
        let k = (t / hop).round();
        if (k * hop - t).abs() > TIME_EPSILON || k < 0.0 {
            return Err(Error::Validation(format!("tick at {t} s is not on a {hop} s hop boundary")));
        }
        let k = k as u64;
        if k < self.next_hop {
            return Err(Error::Validation(format!(
                "tick at {t} s is at or before an earlier tick (next is {} s)",
                self.next_tick_time()
            )));
        }
        self.next_hop = k + 1;
        let started = Instant::now();
        let window = Window {
            start: t - self.config.window_seconds,
            end: t,
        };
        let slices: Vec<(SignalKind, Option<SampleBlock>)> = self
            .buffers
            .iter()
            .map(|(k, b)| (*k, b.window(window.start, window.end)))
            .collect();
        if slices.iter().all(|(_, s)| s.is_none()) {
            return Ok(None);
        }
        let per_modality = predict_window(&slices, &self.models, &self.config.filters)?;
        let state = self.fuser.fuse(&per_modality, t)?;
        Ok(Some(EmotionEvent {
            state,
            window,
            per_modality,
            latency_ms: started.elapsed().as_secs_f64() * 1000.0,
        }))
    }

    /// Runs every pending tick whose boundary is at or before `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<Vec<EmotionEvent>> {
        let mut events = Vec::new();
        while self.next_tick_time() <= t + TIME_EPSILON {
            if let Some(ev) = self.tick(self.next_tick_time())? {
                events.push(ev);
            }
        }
        Ok(events)
    }
}

/// Event count for a stream of `duration` seconds under `config`.
pub fn expected_event_count(duration: f64, config: &EngineConfig) -> usize {
    if duration + TIME_EPSILON < config.window_seconds {
        return 0;
    }
    let first = hop_index_at_or_after(config.window_seconds, config.hop_seconds);
    let last = ((duration + TIME_EPSILON) / config.hop_seconds).floor() as u64;
    (last + 1).saturating_sub(first) as usize
}
