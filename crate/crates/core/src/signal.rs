//! Domain types for signals, trials and self-report labels.
//!
//! Everything here is validated on construction and immutable afterwards.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing sample timestamps derived from `start + i / fs`.
pub const TIME_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignalKind {
    #[serde(rename = "EEG")]
    Eeg,
    #[serde(rename = "PPG")]
    Ppg,
    #[serde(rename = "EDA")]
    Eda,
}

impl SignalKind {
    pub const ALL: [SignalKind; 3] = [SignalKind::Eeg, SignalKind::Ppg, SignalKind::Eda];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::Eeg => "EEG",
            SignalKind::Ppg => "PPG",
            SignalKind::Eda => "EDA",
        }
    }

    /// Lower-case stem used for file names.
    pub fn file_stem(self) -> &'static str {
        match self {
            SignalKind::Eeg => "eeg",
            SignalKind::Ppg => "ppg",
            SignalKind::Eda => "eda",
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EEG" => Ok(SignalKind::Eeg),
            "PPG" => Ok(SignalKind::Ppg),
            "EDA" | "GSR" => Ok(SignalKind::Eda),
            other => Err(Error::Validation(format!("unknown signal kind `{other}`"))),
        }
    }
}

/// One cell of the binary arousal x valence plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    HAHV,
    HALV,
    LAHV,
    LALV,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::HAHV, Quadrant::HALV, Quadrant::LAHV, Quadrant::LALV];

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::HAHV => "HAHV",
            Quadrant::HALV => "HALV",
            Quadrant::LAHV => "LAHV",
            Quadrant::LALV => "LALV",
        }
    }

    pub fn high_arousal(self) -> bool {
        matches!(self, Quadrant::HAHV | Quadrant::HALV)
    }

    pub fn high_valence(self) -> bool {
        matches!(self, Quadrant::HAHV | Quadrant::LAHV)
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quadrant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quadrant::ALL
            .into_iter()
            .find(|q| q.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown quadrant `{s}`")))
    }
}

/// A contiguous, uniformly sampled multichannel segment of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    kind: SignalKind,
    start_time: f64,
    sample_rate: f64,
    channels: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl SampleBlock {
    /// Builds a block; `data` holds one row per channel.
    pub fn new(
        kind: SignalKind,
        start_time: f64,
        sample_rate: f64,
        channels: Vec<String>,
        data: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Validation(format!(
                "{kind} block: sample_rate must be positive, got {sample_rate}"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::Validation(format!("{kind} block: non-finite start_time")));
        }
        if channels.is_empty() {
            return Err(Error::Validation(format!("{kind} block: no channels")));
        }
        if data.len() != channels.len() {
            return Err(Error::Validation(format!(
                "{kind} block: {} data rows for {} channels",
                data.len(),
                channels.len()
            )));
        }
        let n = data[0].len();
        if data.iter().any(|row| row.len() != n) {
            return Err(Error::Validation(format!("{kind} block: ragged channel rows")));
        }
        for (ch, row) in channels.iter().zip(&data) {
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "{kind} block: non-finite sample in channel `{ch}` at index {i}"
                )));
            }
        }
        Ok(Self {
            kind,
            start_time,
            sample_rate,
            channels,
            data,
        })
    }

    /// Single-channel convenience constructor.
    pub fn mono(kind: SignalKind, start_time: f64, sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        Self::new(kind, start_time, sample_rate, vec![kind.file_stem().to_string()], vec![samples])
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn n_samples(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples() == 0
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }

    /// Time one sample period past the last sample.
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    pub fn time_of(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    /// Same metadata, new sample rows. Used by the conditioning filters.
    pub fn with_data(&self, data: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.kind, self.start_time, self.sample_rate, self.channels.clone(), data)
    }

    pub fn into_data(self) -> Vec<Vec<f64>> {
        self.data
    }

    /// The samples in `range`, re-timed to start at the first of them.
    pub fn slice(&self, range: Range<usize>) -> SampleBlock {
        SampleBlock {
            kind: self.kind,
            start_time: self.time_of(range.start),
            sample_rate: self.sample_rate,
            channels: self.channels.clone(),
            data: self.data.iter().map(|row| row[range.clone()].to_vec()).collect(),
        }
    }

    /// Index of the first sample at or after `t`, clamped to `[0, n_samples]`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t - self.start_time) * self.sample_rate - 1e-6).ceil();
        k.clamp(0.0, self.n_samples() as f64) as usize
    }

    /// True when `next` continues this block without a gap (half-period tolerance).
    pub fn is_continued_by(&self, next: &SampleBlock) -> bool {
        next.sample_rate == self.sample_rate
            && next.channels == self.channels
            && (next.start_time - self.end_time()).abs() < 0.5 / self.sample_rate
    }
}

/// Five-point self-assessment ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabel", into = "RawLabel")]
pub struct SelfReportLabel {
    arousal_rate: u8,
    valence_rate: u8,
}

#[derive(Serialize, Deserialize)]
struct RawLabel {
    arousal_rate: i64,
    valence_rate: i64,
}

impl TryFrom<RawLabel> for SelfReportLabel {
    type Error = Error;

    fn try_from(raw: RawLabel) -> Result<Self> {
        SelfReportLabel::new(raw.arousal_rate, raw.valence_rate)
    }
}

impl From<SelfReportLabel> for RawLabel {
    fn from(l: SelfReportLabel) -> Self {
        RawLabel {
            arousal_rate: l.arousal_rate.into(),
            valence_rate: l.valence_rate.into(),
        }
    }
}

pub(crate) fn check_rate(name: &str, rate: i64) -> Result<u8> {
    if (1..=5).contains(&rate) {
        Ok(rate as u8)
    } else {
        Err(Error::Validation(format!("{name} must be in 1..=5, got {rate}")))
    }
}

impl SelfReportLabel {
    pub fn new(arousal_rate: i64, valence_rate: i64) -> Result<Self> {
        Ok(Self {
            arousal_rate: check_rate("arousal_rate", arousal_rate)?,
            valence_rate: check_rate("valence_rate", valence_rate)?,
        })
    }

    pub fn arousal_rate(&self) -> u8 {
        self.arousal_rate
    }

    pub fn valence_rate(&self) -> u8 {
        self.valence_rate
    }
}

/// A user utterance, in session seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechSpan {
    pub start: f64,
    pub end: f64,
}

/// A labelled conversation trial: the unit of training and replay.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    trial_id: String,
    topic_category: Quadrant,
    streams: BTreeMap<SignalKind, Vec<SampleBlock>>,
    label: SelfReportLabel,
    speech_spans: Vec<SpeechSpan>,
}

impl TrialRecord {
    pub fn new(
        trial_id: impl Into<String>,
        topic_category: Quadrant,
        streams: BTreeMap<SignalKind, Vec<SampleBlock>>,
        label: SelfReportLabel,
        speech_spans: Vec<SpeechSpan>,
    ) -> Result<Self> {
        let trial_id = trial_id.into();
        if trial_id.is_empty() || trial_id.contains(['/', '\\']) {
            return Err(Error::Validation(format!("invalid trial id `{trial_id}`")));
        }
        for (kind, blocks) in &streams {
            validate_stream(*kind, blocks)?;
        }
        for span in &speech_spans {
            if !(span.start.is_finite() && span.end.is_finite() && span.start <= span.end) {
                return Err(Error::Validation(format!(
                    "speech span ({}, {}) must satisfy start <= end",
                    span.start, span.end
                )));
            }
        }
        Ok(Self {
            trial_id,
            topic_category,
            streams,
            label,
            speech_spans,
        })
    }

    pub fn trial_id(&self) -> &str {
        &self.trial_id
    }

    pub fn topic_category(&self) -> Quadrant {
        self.topic_category
    }

    pub fn streams(&self) -> &BTreeMap<SignalKind, Vec<SampleBlock>> {
        &self.streams
    }

    pub fn stream(&self, kind: SignalKind) -> Option<&[SampleBlock]> {
        self.streams.get(&kind).map(Vec::as_slice)
    }

    pub fn label(&self) -> SelfReportLabel {
        self.label
    }

    pub fn speech_spans(&self) -> &[SpeechSpan] {
        &self.speech_spans
    }

    /// Covered time of one stream, from its first sample to one period past its last.
    pub fn stream_span(&self, kind: SignalKind) -> Option<(f64, f64)> {
        let blocks = self.streams.get(&kind)?;
        let first = blocks.iter().find(|b| !b.is_empty())?;
        let last = blocks.iter().rev().find(|b| !b.is_empty())?;
        Some((first.start_time(), last.end_time()))
    }

    /// Latest end time over all streams (0 when the trial holds no samples).
    pub fn end_time(&self) -> f64 {
        SignalKind::ALL
            .iter()
            .filter_map(|k| self.stream_span(*k))
            .map(|(_, end)| end)
            .fold(0.0, f64::max)
    }
}

fn validate_stream(kind: SignalKind, blocks: &[SampleBlock]) -> Result<()> {
    let mut prev: Option<&SampleBlock> = None;
    for block in blocks {
        if block.kind() != kind {
            return Err(Error::Validation(format!(
                "{} block filed under the {kind} stream",
                block.kind()
            )));
        }
        if let Some(p) = prev {
            if p.sample_rate() != block.sample_rate() || p.channels() != block.channels() {
                return Err(Error::Validation(format!(
                    "{kind} stream: blocks disagree on sample rate or channel layout"
                )));
            }
            if block.start_time() <= p.start_time() || block.start_time() < p.end_time() - TIME_EPSILON {
                return Err(Error::Validation(format!(
                    "{kind} stream: block at {} overlaps or precedes block ending at {}",
                    block.start_time(),
                    p.end_time()
                )));
            }
        }
        prev = Some(block);
    }
    Ok(())
}
