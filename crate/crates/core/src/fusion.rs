//! Weighted decision fusion of per-modality votes and the quadrant to expression map.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryLevel, Dimension, ModalityPrediction};
use crate::signal::{Quadrant, SignalKind};

/// Per-modality weights for one dimension. All weights must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionWeights {
    pub eeg: f64,
    pub eda: f64,
    pub ppg: f64,
}

impl FusionWeights {
    pub const VALENCE_DEFAULT: FusionWeights = FusionWeights { eeg: 1.0, eda: 1.0, ppg: 1.0 };
    pub const AROUSAL_DEFAULT: FusionWeights = FusionWeights { eeg: 1.0, eda: 2.0, ppg: 2.0 };

    pub fn new(eeg: f64, eda: f64, ppg: f64) -> Result<Self> {
        let w = Self { eeg, eda, ppg };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eeg", self.eeg), ("eda", self.eda), ("ppg", self.ppg)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("fusion weight `{name}` must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn weight(&self, kind: SignalKind) -> f64 {
        match kind {
            SignalKind::Eeg => self.eeg,
            SignalKind::Eda => self.eda,
            SignalKind::Ppg => self.ppg,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            eeg: self.eeg * k,
            eda: self.eda * k,
            ppg: self.ppg * k,
        }
    }
}

/// Weight sets for both dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub arousal: FusionWeights,
    pub valence: FusionWeights,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            arousal: FusionWeights::AROUSAL_DEFAULT,
            valence: FusionWeights::VALENCE_DEFAULT,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        self.arousal.validate()?;
        self.valence.validate()
    }

    pub fn weights(&self, dim: Dimension) -> &FusionWeights {
        match dim {
            Dimension::Arousal => &self.arousal,
            Dimension::Valence => &self.valence,
        }
    }
}

/// Facial expression displayed by the agent for a quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expression {
    StrongHappiness,
    AngerScaredness,
    SlightHappiness,
    Sadness,
}

impl Expression {
    pub fn as_str(self) -> &'static str {
        match self {
            Expression::StrongHappiness => "StrongHappiness",
            Expression::AngerScaredness => "AngerScaredness",
            Expression::SlightHappiness => "SlightHappiness",
            Expression::Sadness => "Sadness",
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn quadrant_expression(arousal: BinaryLevel, valence: BinaryLevel) -> (Quadrant, Expression) {
    use BinaryLevel::{High, Low};
    match (arousal, valence) {
        (High, High) => (Quadrant::HAHV, Expression::StrongHappiness),
        (High, Low) => (Quadrant::HALV, Expression::AngerScaredness),
        (Low, High) => (Quadrant::LAHV, Expression::SlightHappiness),
        (Low, Low) => (Quadrant::LALV, Expression::Sadness),
    }
}

/// Inverse of the quadrant part of [`quadrant_expression`].
pub fn quadrant_levels(q: Quadrant) -> (BinaryLevel, BinaryLevel) {
    let level = |high| if high { BinaryLevel::High } else { BinaryLevel::Low };
    (level(q.high_arousal()), level(q.high_valence()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub arousal: f64,
    pub valence: f64,
}

/// Fused emotional state at one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionState {
    pub arousal: BinaryLevel,
    pub valence: BinaryLevel,
    pub quadrant: Quadrant,
    pub expression: Expression,
    pub raw_scores: RawScores,
    pub timestamp: f64,
}

impl EmotionState {
    pub fn from_levels(arousal: BinaryLevel, valence: BinaryLevel, raw_scores: RawScores, timestamp: f64) -> Self {
        let (quadrant, expression) = quadrant_expression(arousal, valence);
        Self {
            arousal,
            valence,
            quadrant,
            expression,
            raw_scores,
            timestamp,
        }
    }

    pub fn level(&self, dim: Dimension) -> BinaryLevel {
        match dim {
            Dimension::Arousal => self.arousal,
            Dimension::Valence => self.valence,
        }
    }
}

fn check_unique(preds: &[ModalityPrediction]) -> Result<()> {
    for (i, p) in preds.iter().enumerate() {
        if preds[..i].iter().any(|q| q.modality == p.modality) {
            return Err(Error::Validation(format!("duplicate {} prediction", p.modality)));
        }
    }
    Ok(())
}

/// Weighted sum of the signed votes present in `preds`.
pub fn fusion_score(preds: &[ModalityPrediction], dim: Dimension, weights: &FusionWeights) -> f64 {
    preds.iter().map(|p| weights.weight(p.modality) * p.level(dim).as_f64()).sum()
}

/// Fuses one prediction from each of the three modalities.
pub fn fuse(
    preds: &[ModalityPrediction],
    weights_arousal: &FusionWeights,
    weights_valence: &FusionWeights,
    t: f64,
) -> Result<EmotionState> {
    weights_arousal.validate()?;
    weights_valence.validate()?;
    check_unique(preds)?;
    if let Some(missing) = SignalKind::ALL.iter().find(|k| !preds.iter().any(|p| p.modality == **k)) {
        return Err(Error::Validation(format!("fusion needs all three modalities; {missing} is missing")));
    }
    let pa = fusion_score(preds, Dimension::Arousal, weights_arousal);
    let pv = fusion_score(preds, Dimension::Valence, weights_valence);
    Ok(EmotionState::from_levels(
        BinaryLevel::from_sign(pa),
        BinaryLevel::from_sign(pv),
        RawScores { arousal: pa, valence: pv },
        t,
    ))
}

/// Session-scoped fusion tolerating missing modalities.
///
/// Missing terms are left out of the sum. A zero sum (including no votes at
/// all) holds the previous window's level, or low at session start.
#[derive(Debug, Clone)]
pub struct SessionFuser {
    config: FusionConfig,
    previous: Option<(BinaryLevel, BinaryLevel)>,
}

impl SessionFuser {
    pub fn new(config: FusionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, previous: None })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn fuse(&mut self, preds: &[ModalityPrediction], t: f64) -> Result<EmotionState> {
        check_unique(preds)?;
        let (prev_a, prev_v) = self.previous.unwrap_or((BinaryLevel::Low, BinaryLevel::Low));
        let pa = fusion_score(preds, Dimension::Arousal, &self.config.arousal);
        let pv = fusion_score(preds, Dimension::Valence, &self.config.valence);
        let decide = |p: f64, held| if p == 0.0 { held } else { BinaryLevel::from_sign(p) };
        let state = EmotionState::from_levels(
            decide(pa, prev_a),
            decide(pv, prev_v),
            RawScores { arousal: pa, valence: pv },
            t,
        );
        self.previous = Some((state.arousal, state.valence));
        Ok(state)
    }
}

/// Most frequent quadrant; ties go to the tied quadrant seen most recently.
pub fn majority_quadrant(quadrants: &[Quadrant]) -> Result<Quadrant> {
    let mut counts = [0usize; 4];
    let mut last_seen = [0usize; 4];
    for (i, q) in quadrants.iter().enumerate() {
        let k = *q as usize;
        counts[k] += 1;
        last_seen[k] = i;
    }
    Quadrant::ALL
        .into_iter()
        .filter(|q| counts[*q as usize] > 0)
        .max_by_key(|q| (counts[*q as usize], last_seen[*q as usize]))
        .ok_or_else(|| Error::Validation("majority of an empty emotion list".into()))
}

pub fn majority_emotion(states: &[EmotionState]) -> Result<Quadrant> {
    majority_quadrant(&states.iter().map(|s| s.quadrant).collect::<Vec<_>>())
}
