//! Trial replay through the streaming engine, the batch oracle path, and event logs.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::{expected_event_count, predict_window, slice_window, EmotionEvent, Engine, EngineConfig, Window};
use crate::error::{Error, Result};
use crate::fusion::SessionFuser;
use crate::model::ModelSet;
use crate::signal::{SampleBlock, SignalKind, TrialRecord, TIME_EPSILON};

/// Replay pacing: `Factor(2.0)` runs twice as fast as real time, `Max` unpaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    Max,
    Factor(f64),
}

impl FromStr for Speed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(Speed::Max);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Speed::Factor(v)),
            _ => Err(Error::Validation(format!("speed must be a positive number or `max`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speed::Max => f.write_str("max"),
            Speed::Factor(v) => write!(f, "{v}"),
        }
    }
}

pub trait Clock {
    fn elapsed(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// A clock that only moves when slept on.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl Clock for ManualClock {
    fn elapsed(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

fn feed(engine: &mut Engine, trial: &TrialRecord, from: Option<f64>, to: f64) -> Result<()> {
    for blocks in trial.streams().values() {
        for b in blocks {
            let i0 = from.map_or(0, |t| b.index_at(t));
            let i1 = b.index_at(to);
            if i1 > i0 {
                engine.ingest(b.slice(i0..i1))?;
            }
        }
    }
    Ok(())
}

/// Replays `trial` through a fresh engine on the wall clock.
pub fn replay(trial: &TrialRecord, config: &EngineConfig, models: Arc<ModelSet>, speed: Speed) -> Result<Vec<EmotionEvent>> {
    replay_with(trial, config, models, speed, &WallClock::new(), |_| {})
}

/// Feeds the trial hop by hop, sleeping on `clock` so that the tick at stream
/// time `t` happens no earlier than `t / speed`. Event contents do not depend
/// on `speed` or `clock`.
pub fn replay_with(
    trial: &TrialRecord,
    config: &EngineConfig,
    models: Arc<ModelSet>,
    speed: Speed,
    clock: &dyn Clock,
    mut on_event: impl FnMut(&EmotionEvent),
) -> Result<Vec<EmotionEvent>> {
    let mut engine = Engine::new(config.clone(), models)?;
    let duration = trial.end_time();
    let hop = config.hop_seconds;
    let mut events = Vec::with_capacity(expected_event_count(duration, config));
    let mut prev = None;
    for k in 1u64.. {
        let t = k as f64 * hop;
        if t > duration + TIME_EPSILON {
            break;
        }
        feed(&mut engine, trial, prev, t)?;
        prev = Some(t);
        if let Speed::Factor(s) = speed {
            let due = Duration::from_secs_f64(t / s);
            let now = clock.elapsed();
            if due > now {
                clock.sleep(due - now);
            }
        }
        if t + TIME_EPSILON >= config.window_seconds {
            if let Some(ev) = engine.tick(t)? {
                on_event(&ev);
                events.push(ev);
            }
        }
    }
    Ok(events)
}

/// The same windows classified straight from the trial's blocks, without
/// buffering or pacing. Used as an oracle for [`replay`].
pub fn classify_trial(trial: &TrialRecord, config: &EngineConfig, models: &ModelSet) -> Result<Vec<EmotionEvent>> {
    config.validate()?;
    let mut fuser = SessionFuser::new(config.fusion)?;
    let duration = trial.end_time();
    let n = expected_event_count(duration, config);
    let first = (config.window_seconds / config.hop_seconds - 1e-9).ceil();
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let started = Instant::now();
        let t = (first + i as f64) * config.hop_seconds;
        let window = Window {
            start: t - config.window_seconds,
            end: t,
        };
        let slices: Vec<(SignalKind, Option<SampleBlock>)> = SignalKind::ALL
            .into_iter()
            .map(|k| (k, trial.stream(k).and_then(|b| slice_window(b, window.start, window.end))))
            .collect();
        if slices.iter().all(|(_, s)| s.is_none()) {
            continue;
        }
        let per_modality = predict_window(&slices, models, &config.filters)?;
        let state = fuser.fuse(&per_modality, t)?;
        events.push(EmotionEvent {
            state,
            window,
            per_modality,
            latency_ms: started.elapsed().as_secs_f64() * 1000.0,
        });
    }
    Ok(events)
}

/// One JSON event per line.
pub fn write_event_log(mut out: impl Write, events: &[EmotionEvent]) -> std::io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_event_log(input: impl BufRead) -> Result<Vec<EmotionEvent>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<event log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: "<event log>".into(),
            line: i + 1,
            field: "event".into(),
            message: e.to_string(),
        })?);
    }
    Ok(events)
}
