//! Window-level feature extraction for each modality.
//!
//! Feature names are stable strings; trained models store the list they were
//! fitted on and refuse vectors whose names differ.

mod eda;
mod hrv;
mod ppg;
mod psd;

pub use eda::{eda_decompose, eda_features, find_phasic_peaks, EdaComponents, EDA_FEATURE_NAMES, EDA_TONIC_CUTOFF_HZ, MIN_PEAK_PROMINENCE};
pub use hrv::{hrv_features, HrvStats, HRV_FEATURE_NAMES, HTI_BIN_WIDTH_MS, MAD_SCALE};
pub use ppg::{detect_ppg_peaks, detect_ppg_peak_indices, NNSeries, NN_MAX_MS, NN_MIN_MS};
pub use psd::{band_powers, eeg_band_psd, welch_psd, EegBand, EEG_BANDS, PSD_FEATURE_NAMES};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalKind;

/// Named feature values for one modality over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    modality: SignalKind,
    names: Vec<String>,
    values: Vec<f64>,
    window_start: f64,
    window_len: f64,
}

impl FeatureVector {
    pub fn new(
        modality: SignalKind,
        names: Vec<String>,
        values: Vec<f64>,
        window_start: f64,
        window_len: f64,
    ) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} feature names for {} values",
                names.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Validation(format!("duplicate feature name `{dup}`")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("feature `{}` is not finite", names[i])));
        }
        Ok(Self {
            modality,
            names,
            values,
            window_start,
            window_len,
        })
    }

    pub(crate) fn from_static(
        modality: SignalKind,
        names: &[&str],
        values: Vec<f64>,
        window_start: f64,
        window_len: f64,
    ) -> Result<Self> {
        Self::new(
            modality,
            names.iter().map(|s| s.to_string()).collect(),
            values,
            window_start,
            window_len,
        )
    }

    pub fn modality(&self) -> SignalKind {
        self.modality
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window_start(&self) -> f64 {
        self.window_start
    }

    pub fn window_len(&self) -> f64 {
        self.window_len
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Re-stamps the window the vector belongs to.
    pub fn at_window(mut self, window_start: f64, window_len: f64) -> Self {
        self.window_start = window_start;
        self.window_len = window_len;
        self
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (ddof 0).
pub(crate) fn variance_pop(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (ddof 1).
pub(crate) fn std_sample(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_invariants() {
        let names = vec!["a".to_string(), "a".to_string()];
        assert!(FeatureVector::new(SignalKind::Eeg, names, vec![1.0, 2.0], 0.0, 20.0).is_err());
        assert!(FeatureVector::new(SignalKind::Eeg, vec!["a".into()], vec![f64::NAN], 0.0, 20.0).is_err());
        assert!(FeatureVector::new(SignalKind::Eeg, vec!["a".into()], vec![], 0.0, 20.0).is_err());
        let v = FeatureVector::new(SignalKind::Eeg, vec!["a".into(), "b".into()], vec![1.0, 2.0], 0.0, 20.0).unwrap();
        assert_eq!(v.get("b"), Some(2.0));
        assert_eq!(v.get("c"), None);
    }
}
