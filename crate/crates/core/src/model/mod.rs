//! Label binarization and per-modality random-forest classifiers.

mod forest;
mod set;

pub use forest::{load_model, save_model, train, ForestModel, Hyperparams, Node, TrainingSet, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use set::{model_file_name, ModelSet, MODEL_INDEX_FILE};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{check_rate, SignalKind};

/// A binary arousal or valence level: low = -1, high = +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum BinaryLevel {
    Low,
    High,
}

impl BinaryLevel {
    pub fn value(self) -> i8 {
        match self {
            BinaryLevel::Low => -1,
            BinaryLevel::High => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    /// `-1` when `score < 0`, otherwise `+1`.
    pub fn from_sign(score: f64) -> Self {
        if score < 0.0 {
            BinaryLevel::Low
        } else {
            BinaryLevel::High
        }
    }
}

impl TryFrom<i8> for BinaryLevel {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(BinaryLevel::Low),
            1 => Ok(BinaryLevel::High),
            other => Err(Error::Validation(format!("binary level must be -1 or +1, got {other}"))),
        }
    }
}

impl From<BinaryLevel> for i8 {
    fn from(l: BinaryLevel) -> i8 {
        l.value()
    }
}

impl fmt::Display for BinaryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Arousal,
    Valence,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Arousal, Dimension::Valence];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Arousal => "arousal",
            Dimension::Valence => "valence",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How valence ratings map onto binary levels.
///
/// `PaperLiteral` maps ratings above 3 to **low** (-1), the opposite polarity
/// of the arousal rule. `Conventional` maps them to high (+1).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValenceMode {
    #[default]
    PaperLiteral,
    Conventional,
}

/// Ratings 1..=3 are low arousal, 4..=5 high.
pub fn binarize_arousal(rate: i64) -> Result<BinaryLevel> {
    let rate = check_rate("arousal rate", rate)?;
    Ok(if rate <= 3 { BinaryLevel::Low } else { BinaryLevel::High })
}

pub fn binarize_valence(rate: i64, mode: ValenceMode) -> Result<BinaryLevel> {
    let rate = check_rate("valence rate", rate)?;
    let above = rate > 3;
    Ok(match (mode, above) {
        (ValenceMode::PaperLiteral, true) | (ValenceMode::Conventional, false) => BinaryLevel::Low,
        (ValenceMode::PaperLiteral, false) | (ValenceMode::Conventional, true) => BinaryLevel::High,
    })
}

/// Binary arousal and valence decided from a single modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityPrediction {
    pub modality: SignalKind,
    pub arousal: BinaryLevel,
    pub valence: BinaryLevel,
}

impl ModalityPrediction {
    pub fn level(&self, dim: Dimension) -> BinaryLevel {
        match dim {
            Dimension::Arousal => self.arousal,
            Dimension::Valence => self.valence,
        }
    }
}
