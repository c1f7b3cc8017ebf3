//! Agreement between recognised levels and the binarized self-reports.
//!
//! Per trial, a source (one modality or the fused state) agrees when the
//! majority of its window decisions equals the trial label; an even split goes
//! to the most recent decision. Per window, every decision counts on its own.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{classify_trial, replay, EmotionEvent, EngineConfig, Speed};
use crate::error::{Error, Result};
use crate::model::{BinaryLevel, Dimension, ModelSet};
use crate::signal::{SignalKind, TrialRecord};
use crate::training::trial_levels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "EEG")]
    Eeg,
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "PPG")]
    Ppg,
    #[serde(rename = "fused")]
    Fused,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Eeg, Source::Eda, Source::Ppg, Source::Fused];

    pub fn modality(self) -> Option<SignalKind> {
        match self {
            Source::Eeg => Some(SignalKind::Eeg),
            Source::Eda => Some(SignalKind::Eda),
            Source::Ppg => Some(SignalKind::Ppg),
            Source::Fused => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Eeg => "EEG",
            Source::Eda => "EDA",
            Source::Ppg => "PPG",
            Source::Fused => "fused",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Trial,
    Window,
}

/// Counts indexed by (label, prediction).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub low_as_low: usize,
    pub low_as_high: usize,
    pub high_as_low: usize,
    pub high_as_high: usize,
}

impl Confusion {
    fn add(&mut self, label: BinaryLevel, pred: BinaryLevel) {
        use BinaryLevel::{High, Low};
        match (label, pred) {
            (Low, Low) => self.low_as_low += 1,
            (Low, High) => self.low_as_high += 1,
            (High, Low) => self.high_as_low += 1,
            (High, High) => self.high_as_high += 1,
        }
    }

    pub fn agreed(&self) -> usize {
        self.low_as_low + self.high_as_high
    }

    pub fn total(&self) -> usize {
        self.agreed() + self.low_as_high + self.high_as_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub source: Source,
    pub dimension: Dimension,
    pub agreed: usize,
    /// Trials (or windows) with at least one decision from this source.
    pub evaluated: usize,
    /// `None` when nothing was evaluated.
    pub percent: Option<f64>,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub granularity: Granularity,
    pub trials: usize,
    pub entries: Vec<AlignmentEntry>,
}

impl AlignmentReport {
    pub fn entry(&self, source: Source, dimension: Dimension) -> Option<&AlignmentEntry> {
        self.entries.iter().find(|e| e.source == source && e.dimension == dimension)
    }

    pub fn percent(&self, source: Source, dimension: Dimension) -> Option<f64> {
        self.entry(source, dimension).and_then(|e| e.percent)
    }

    pub fn to_text(&self) -> String {
        let unit = match self.granularity {
            Granularity::Trial => "trials",
            Granularity::Window => "windows",
        };
        let mut s = format!("alignment over {} trials ({unit} scored)\n", self.trials);
        s.push_str("source  dimension  agreement      count\n");
        for e in &self.entries {
            let pct = e.percent.map_or("     n/a".to_string(), |p| format!("{p:>7.1}%"));
            s.push_str(&format!(
                "{:<7} {:<10} {pct}  {:>5}/{:<5}\n",
                e.source.as_str(),
                e.dimension.as_str(),
                e.agreed,
                e.evaluated
            ));
        }
        s
    }
}

/// A trial's binarized label together with the events recognised on it.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial_id: String,
    pub arousal: BinaryLevel,
    pub valence: BinaryLevel,
    pub events: Vec<EmotionEvent>,
}

impl TrialOutcome {
    fn label(&self, dim: Dimension) -> BinaryLevel {
        match dim {
            Dimension::Arousal => self.arousal,
            Dimension::Valence => self.valence,
        }
    }

    fn decisions(&self, source: Source, dim: Dimension) -> Vec<BinaryLevel> {
        match source.modality() {
            None => self.events.iter().map(|e| e.state.level(dim)).collect(),
            Some(kind) => self
                .events
                .iter()
                .filter_map(|e| e.per_modality.iter().find(|p| p.modality == kind))
                .map(|p| p.level(dim))
                .collect(),
        }
    }
}

/// Majority of binary decisions; an even split takes the last decision.
pub fn majority_level(levels: &[BinaryLevel]) -> Option<BinaryLevel> {
    let high = levels.iter().filter(|l| **l == BinaryLevel::High).count();
    let low = levels.len() - high;
    match high.cmp(&low) {
        std::cmp::Ordering::Greater => Some(BinaryLevel::High),
        std::cmp::Ordering::Less => Some(BinaryLevel::Low),
        std::cmp::Ordering::Equal => levels.last().copied(),
    }
}

pub fn alignment_report(outcomes: &[TrialOutcome], granularity: Granularity) -> Result<AlignmentReport> {
    if outcomes.is_empty() {
        return Err(Error::Validation("alignment needs at least one trial; the dataset is empty".into()));
    }
    let mut entries = Vec::new();
    for source in Source::ALL {
        for dim in Dimension::ALL {
            let mut confusion = Confusion::default();
            for o in outcomes {
                let label = o.label(dim);
                let decisions = o.decisions(source, dim);
                match granularity {
                    Granularity::Trial => {
                        if let Some(m) = majority_level(&decisions) {
                            confusion.add(label, m);
                        }
                    }
                    Granularity::Window => decisions.iter().for_each(|d| confusion.add(label, *d)),
                }
            }
            let evaluated = confusion.total();
            entries.push(AlignmentEntry {
                source,
                dimension: dim,
                agreed: confusion.agreed(),
                evaluated,
                percent: (evaluated > 0).then(|| 100.0 * confusion.agreed() as f64 / evaluated as f64),
                confusion,
            });
        }
    }
    Ok(AlignmentReport {
        granularity,
        trials: outcomes.len(),
        entries,
    })
}

/// Replays every trial through the streaming engine (unpaced, in parallel).
pub fn replay_outcomes(trials: &[TrialRecord], config: &EngineConfig, models: Arc<ModelSet>) -> Result<Vec<TrialOutcome>> {
    trials
        .par_iter()
        .map(|t| {
            let (arousal, valence) = trial_levels(t, config.valence_mode)?;
            Ok(TrialOutcome {
                trial_id: t.trial_id().to_string(),
                arousal,
                valence,
                events: replay(t, config, Arc::clone(&models), Speed::Max)?,
            })
        })
        .collect()
}

/// Direct per-window classification of every trial, without the engine.
pub fn batch_outcomes(trials: &[TrialRecord], config: &EngineConfig, models: &ModelSet) -> Result<Vec<TrialOutcome>> {
    trials
        .par_iter()
        .map(|t| {
            let (arousal, valence) = trial_levels(t, config.valence_mode)?;
            Ok(TrialOutcome {
                trial_id: t.trial_id().to_string(),
                arousal,
                valence,
                events: classify_trial(t, config, models)?,
            })
        })
        .collect()
}

/// Trial ids whose streamed and batch events differ (ignoring latency).
pub fn outcome_mismatches(streamed: &[TrialOutcome], batch: &[TrialOutcome]) -> Vec<String> {
    streamed
        .iter()
        .zip(batch)
        .filter(|(s, b)| {
            s.trial_id != b.trial_id
                || s.events.len() != b.events.len()
                || s.events.iter().zip(&b.events).any(|(x, y)| !x.same_content(y))
        })
        .map(|(s, _)| s.trial_id.clone())
        .collect()
}

pub fn evaluate_alignment(trials: &[TrialRecord], config: &EngineConfig, models: Arc<ModelSet>, granularity: Granularity) -> Result<AlignmentReport> {
    if trials.is_empty() {
        return Err(Error::Validation("alignment needs at least one trial; the dataset is empty".into()));
    }
    alignment_report(&replay_outcomes(trials, config, models)?, granularity)
}
