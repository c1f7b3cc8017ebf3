//! Tonic/phasic decomposition of skin conductance and its summary statistics.

use super::{mean, variance_pop, FeatureVector};
use crate::error::{Error, Result};
use crate::preprocess::FilterSpec;
use crate::signal::{SampleBlock, SignalKind};

pub const EDA_TONIC_CUTOFF_HZ: f64 = 0.05;
const TONIC_ORDER: u8 = 2;
pub const MIN_EDA_SECONDS: f64 = 20.0;
/// Minimum prominence of a phasic peak, in microsiemens.
pub const MIN_PEAK_PROMINENCE: f64 = 0.01;

pub const EDA_FEATURE_NAMES: [&str; 11] = [
    "tonic_mean",
    "tonic_std",
    "tonic_var",
    "phasic_mean",
    "phasic_std",
    "phasic_var",
    "peaks_count",
    "peaks_mean",
    "peaks_std",
    "peaks_var",
    "peaks_pos_derivatives",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EdaComponents {
    pub tonic: Vec<f64>,
    pub phasic: Vec<f64>,
    pub sample_rate: f64,
    pub start_time: f64,
}

/// Splits conditioned EDA (first channel) into a slow tonic baseline and the
/// phasic residual. The baseline is a zero-phase 0.05 Hz low-pass whose edge
/// extension spans the filter's settling time.
pub fn eda_decompose(block: &SampleBlock) -> Result<EdaComponents> {
    if block.kind() != SignalKind::Eda {
        return Err(Error::Validation(format!("expected an EDA block, got {}", block.kind())));
    }
    if block.duration() + 1e-9 < MIN_EDA_SECONDS {
        return Err(Error::insufficient(
            "EDA decomposition",
            format!("{MIN_EDA_SECONDS} s"),
            format!("{:.3} s", block.duration()),
        ));
    }
    let fs = block.sample_rate();
    let x = block.channel(0);
    let sos = FilterSpec::lowpass(EDA_TONIC_CUTOFF_HZ, TONIC_ORDER).design(fs)?;
    let tonic = sos.filtfilt(x, tonic_padlen(fs).max(sos.default_padlen()));
    let phasic = x.iter().zip(&tonic).map(|(v, t)| v - t).collect();
    Ok(EdaComponents {
        tonic,
        phasic,
        sample_rate: fs,
        start_time: block.start_time(),
    })
}

/// Roughly three time constants of the tonic filter.
fn tonic_padlen(fs: f64) -> usize {
    (3.0 * fs / (2.0 * std::f64::consts::PI * EDA_TONIC_CUTOFF_HZ) * 2.0f64.sqrt()).round() as usize
}

/// Local maxima of `phasic` with prominence of at least `min_prominence`.
/// Returns `(index, amplitude)` pairs; the amplitude is the phasic value at the peak.
pub fn find_phasic_peaks(phasic: &[f64], min_prominence: f64) -> Vec<(usize, f64)> {
    let n = phasic.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if phasic[i] > phasic[i - 1] {
            // Walk across a plateau; a peak needs a strict descent on its right.
            let mut j = i;
            while j + 1 < n && phasic[j + 1] == phasic[i] {
                j += 1;
            }
            if j + 1 < n && phasic[j + 1] < phasic[i] {
                let h = phasic[i];
                let left_base = phasic[..i]
                    .iter()
                    .rev()
                    .take_while(|v| **v <= h)
                    .fold(h, |m, v| m.min(*v));
                let right_base = phasic[j + 1..]
                    .iter()
                    .take_while(|v| **v <= h)
                    .fold(h, |m, v| m.min(*v));
                if h - left_base.max(right_base) >= min_prominence {
                    peaks.push((i, h));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Tonic and phasic statistics (population variance), peak amplitude
/// statistics, and the mean positive slope of the phasic signal in µS/s.
/// Peak statistics are 0 when no peak is found.
pub fn eda_features(tonic: &[f64], phasic: &[f64], sample_rate: f64) -> Result<FeatureVector> {
    if tonic.len() != phasic.len() || tonic.len() < 2 {
        return Err(Error::Validation(format!(
            "tonic ({}) and phasic ({}) must have equal length >= 2",
            tonic.len(),
            phasic.len()
        )));
    }
    let tonic_var = variance_pop(tonic);
    let phasic_var = variance_pop(phasic);
    let amps: Vec<f64> = find_phasic_peaks(phasic, MIN_PEAK_PROMINENCE).into_iter().map(|(_, a)| a).collect();
    let (peaks_mean, peaks_var) = if amps.is_empty() {
        (0.0, 0.0)
    } else {
        (mean(&amps), variance_pop(&amps))
    };
    let rises: Vec<f64> = phasic
        .windows(2)
        .map(|w| (w[1] - w[0]) * sample_rate)
        .filter(|d| *d > 0.0)
        .collect();
    let pos_deriv = if rises.is_empty() { 0.0 } else { mean(&rises) };

    let values = vec![
        mean(tonic),
        tonic_var.sqrt(),
        tonic_var,
        mean(phasic),
        phasic_var.sqrt(),
        phasic_var,
        amps.len() as f64,
        peaks_mean,
        peaks_var.sqrt(),
        peaks_var,
        pos_deriv,
    ];
    FeatureVector::from_static(
        SignalKind::Eda,
        &EDA_FEATURE_NAMES,
        values,
        0.0,
        tonic.len() as f64 / sample_rate,
    )
}
