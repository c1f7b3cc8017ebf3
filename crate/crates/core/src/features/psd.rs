//! EEG band powers from a Welch periodogram.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::signal::{SampleBlock, SignalKind};

/// Welch segment length.
pub const SEGMENT_SECONDS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EegBand {
    pub name: &'static str,
    pub low_hz: f64,
    pub high_hz: f64,
}

pub const EEG_BANDS: [EegBand; 5] = [
    EegBand { name: "psd_delta", low_hz: 0.5, high_hz: 4.0 },
    EegBand { name: "psd_theta", low_hz: 4.0, high_hz: 8.0 },
    EegBand { name: "psd_alpha", low_hz: 8.0, high_hz: 12.0 },
    EegBand { name: "psd_beta", low_hz: 12.0, high_hz: 30.0 },
    EegBand { name: "psd_gamma", low_hz: 30.0, high_hz: 45.0 },
];

pub const PSD_FEATURE_NAMES: [&str; 5] = ["psd_delta", "psd_theta", "psd_alpha", "psd_beta", "psd_gamma"];

/// One-sided power spectral density by Welch's method.
///
/// Periodic Hann window, 50% overlap, no detrending, density scaling
/// (units²/Hz). Returns `(frequencies, psd)`.
pub fn welch_psd(x: &[f64], sample_rate: f64, segment_len: usize) -> (Vec<f64>, Vec<f64>) {
    let nseg = segment_len.min(x.len()).max(1);
    let step = (nseg - nseg / 2).max(1);
    let window: Vec<f64> = (0..nseg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / nseg as f64).cos())
        .collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (sample_rate * win_energy);

    let fft = FftPlanner::<f64>::new().plan_fft_forward(nseg);
    let n_bins = nseg / 2 + 1;
    let mut psd = vec![0.0; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); nseg];
    let mut count = 0usize;
    let mut start = 0;
    while start + nseg <= x.len() {
        for (b, (v, w)) in buf.iter_mut().zip(x[start..start + nseg].iter().zip(&window)) {
            *b = Complex64::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += step;
    }
    for (k, p) in psd.iter_mut().enumerate() {
        let one_sided = if k == 0 || (nseg.is_multiple_of(2) && k == nseg / 2) { 1.0 } else { 2.0 };
        *p *= one_sided * scale / count.max(1) as f64;
    }
    let freqs = (0..n_bins).map(|k| k as f64 * sample_rate / nseg as f64).collect();
    (freqs, psd)
}

/// Trapezoid integral of `psd` over every bin inside `[low, high]`.
fn integrate_band(freqs: &[f64], psd: &[f64], low: f64, high: f64) -> f64 {
    let inside: Vec<usize> = (0..freqs.len())
        .filter(|&k| freqs[k] >= low - 1e-9 && freqs[k] <= high + 1e-9)
        .collect();
    inside
        .windows(2)
        .map(|w| 0.5 * (psd[w[0]] + psd[w[1]]) * (freqs[w[1]] - freqs[w[0]]))
        .sum()
}

/// Channel-averaged PSD integrated over each EEG band.
pub fn band_powers(block: &SampleBlock) -> [f64; 5] {
    let fs = block.sample_rate();
    let seg = (SEGMENT_SECONDS * fs).round() as usize;
    let mut mean_psd: Vec<f64> = Vec::new();
    let mut freqs = Vec::new();
    for row in block.data() {
        let (f, p) = welch_psd(row, fs, seg);
        if mean_psd.is_empty() {
            mean_psd = vec![0.0; p.len()];
            freqs = f;
        }
        for (m, v) in mean_psd.iter_mut().zip(&p) {
            *m += v;
        }
    }
    let n_ch = block.channels().len() as f64;
    mean_psd.iter_mut().for_each(|m| *m /= n_ch);
    EEG_BANDS.map(|b| integrate_band(&freqs, &mean_psd, b.low_hz, b.high_hz))
}

/// Five band-power features of a conditioned EEG block.
pub fn eeg_band_psd(block: &SampleBlock) -> Result<FeatureVector> {
    if block.kind() != SignalKind::Eeg {
        return Err(Error::Validation(format!("expected an EEG block, got {}", block.kind())));
    }
    let gamma_top = EEG_BANDS[4].high_hz;
    if block.sample_rate() < 2.0 * gamma_top {
        return Err(Error::Validation(format!(
            "sample rate {} Hz cannot represent the gamma band (needs >= {} Hz)",
            block.sample_rate(),
            2.0 * gamma_top
        )));
    }
    if block.duration() + 1e-9 < SEGMENT_SECONDS {
        return Err(Error::insufficient(
            "EEG band power",
            format!("{SEGMENT_SECONDS} s"),
            format!("{:.3} s", block.duration()),
        ));
    }
    let powers = band_powers(block);
    FeatureVector::from_static(
        SignalKind::Eeg,
        &PSD_FEATURE_NAMES,
        powers.to_vec(),
        block.start_time(),
        block.duration(),
    )
}
