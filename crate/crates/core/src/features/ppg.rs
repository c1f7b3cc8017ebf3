//! Systolic peak detection on conditioned PPG and interbeat-interval extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{SampleBlock, SignalKind};

pub const NN_MIN_MS: f64 = 300.0;
pub const NN_MAX_MS: f64 = 2000.0;
/// Minimum record length for HRV work.
pub const MIN_PPG_SECONDS: f64 = 20.0;
const ROLLING_WINDOW_S: f64 = 1.0;
const THRESHOLD_STDS: f64 = 0.5;
const MIN_PEAK_DISTANCE_S: f64 = 0.4;
/// Candidates rising less than this fraction of the median candidate lift
/// above the rolling mean are ringing, not beats.
const MIN_RELATIVE_LIFT: f64 = 0.3;
/// Intervals further than this fraction from the series median are artefacts.
const MEDIAN_DEVIATION: f64 = 0.3;

/// Normal-to-normal interbeat intervals in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NNSeries {
    intervals_ms: Vec<f64>,
}

impl NNSeries {
    pub fn new(intervals_ms: Vec<f64>) -> Result<Self> {
        if let Some(v) = intervals_ms
            .iter()
            .find(|v| !(v.is_finite() && (NN_MIN_MS..=NN_MAX_MS).contains(*v)))
        {
            return Err(Error::Validation(format!(
                "NN interval {v} ms outside [{NN_MIN_MS}, {NN_MAX_MS}]"
            )));
        }
        Ok(Self { intervals_ms })
    }

    pub fn intervals_ms(&self) -> &[f64] {
        &self.intervals_ms
    }

    pub fn len(&self) -> usize {
        self.intervals_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals_ms.is_empty()
    }
}

/// Centred rolling mean and standard deviation, truncated at the edges.
fn rolling_stats(x: &[f64], half: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    let mut mean = Vec::with_capacity(n);
    let mut std = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let k = (hi - lo) as f64;
        let m = (s1[hi] - s1[lo]) / k;
        let var = ((s2[hi] - s2[lo]) / k - m * m).max(0.0);
        mean.push(m);
        std.push(var.sqrt());
    }
    (mean, std)
}

/// Sample indices of systolic peaks.
///
/// A peak is a local maximum above the rolling mean plus half a rolling
/// standard deviation (1 s window) whose lift over the rolling mean is at
/// least 30% of the median candidate lift; peaks closer than 0.4 s keep the
/// taller.
pub fn detect_ppg_peak_indices(x: &[f64], sample_rate: f64) -> Vec<usize> {
    let n = x.len();
    if n < 3 {
        return Vec::new();
    }
    let half = ((ROLLING_WINDOW_S * sample_rate) / 2.0).round() as usize;
    let (mean, std) = rolling_stats(x, half);
    let min_dist = (MIN_PEAK_DISTANCE_S * sample_rate).round() as usize;

    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| {
            let is_max = x[i] > x[i - 1] && x[i] >= x[i + 1];
            is_max && std[i] > 0.0 && x[i] > mean[i] + THRESHOLD_STDS * std[i]
        })
        .collect();
    if candidates.is_empty() {
        return candidates;
    }
    let lift = |i: usize| x[i] - mean[i];
    let typical = median_of(&candidates.iter().map(|&i| lift(i)).collect::<Vec<_>>());

    let mut peaks: Vec<usize> = Vec::new();
    for i in candidates {
        if lift(i) < MIN_RELATIVE_LIFT * typical {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if i - *last < min_dist => {
                if x[i] > x[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    peaks
}

/// Sub-sample peak position by parabolic interpolation through the three samples around `i`.
fn refine(x: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return i as f64;
    }
    let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::EPSILON {
        i as f64
    } else {
        i as f64 + 0.5 * (a - c) / denom
    }
}

fn median_of(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Interbeat intervals from a conditioned PPG block.
///
/// Intervals outside [300, 2000] ms are dropped, then any interval more than
/// 30% away from the median of the survivors (missed or doubled beats).
pub fn detect_ppg_peaks(block: &SampleBlock) -> Result<NNSeries> {
    if block.kind() != SignalKind::Ppg {
        return Err(Error::Validation(format!("expected a PPG block, got {}", block.kind())));
    }
    if block.duration() + 1e-9 < MIN_PPG_SECONDS {
        return Err(Error::insufficient(
            "PPG peak detection",
            format!("{MIN_PPG_SECONDS} s"),
            format!("{:.3} s", block.duration()),
        ));
    }
    let x = block.channel(0);
    let fs = block.sample_rate();
    let times: Vec<f64> = detect_ppg_peak_indices(x, fs)
        .into_iter()
        .map(|i| refine(x, i) / fs * 1000.0)
        .collect();
    let in_range: Vec<f64> = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| (NN_MIN_MS..=NN_MAX_MS).contains(d))
        .collect();
    let intervals: Vec<f64> = if in_range.is_empty() {
        in_range
    } else {
        let med = median_of(&in_range);
        in_range
            .into_iter()
            .filter(|d| (d - med).abs() <= MEDIAN_DEVIATION * med)
            .collect()
    };
    if intervals.len() < 2 {
        return Err(Error::NoBeats(format!(
            "{} usable interbeat interval(s) in {:.1} s of PPG",
            intervals.len(),
            block.duration()
        )));
    }
    NNSeries::new(intervals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{preprocess_ppg, PreprocessConfig};

    /// Gaussian systolic pulses at the given beat times, plus a small dicrotic wave.
    fn pulse_train(beats: &[f64], fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                beats
                    .iter()
                    .map(|b| {
                        let d = t - b;
                        (-(d * d) / (2.0 * 0.06f64.powi(2))).exp() + 0.3 * (-((d - 0.3).powi(2)) / (2.0 * 0.08f64.powi(2))).exp()
                    })
                    .sum::<f64>()
                    + 100.0
            })
            .collect()
    }

    fn conditioned(x: Vec<f64>) -> SampleBlock {
        let raw = SampleBlock::mono(SignalKind::Ppg, 0.0, 128.0, x).unwrap();
        preprocess_ppg(&raw, &PreprocessConfig::default().ppg).unwrap()
    }

    #[test]
    fn steady_75_bpm() {
        let beats: Vec<f64> = (0..26).map(|k| 0.3 + 0.8 * k as f64).collect();
        let nn = detect_ppg_peaks(&conditioned(pulse_train(&beats, 128.0, 20.0))).unwrap();
        assert!(nn.len() >= 22, "{}", nn.len());
        assert!(nn.intervals_ms().iter().all(|v| (v - 800.0).abs() <= 10.0), "{:?}", nn.intervals_ms());
    }

    #[test]
    fn missing_beat_gap_dropped() {
        let beats: Vec<f64> = (0..26).filter(|&k| k != 12).map(|k| 0.3 + 0.8 * k as f64).collect();
        let nn = detect_ppg_peaks(&conditioned(pulse_train(&beats, 128.0, 20.0))).unwrap();
        assert!(nn.intervals_ms().iter().all(|v| (v - 800.0).abs() <= 10.0), "{:?}", nn.intervals_ms());
        let full: Vec<f64> = (0..26).map(|k| 0.3 + 0.8 * k as f64).collect();
        let nn_full = detect_ppg_peaks(&conditioned(pulse_train(&full, 128.0, 20.0))).unwrap();
        assert_eq!(nn.len(), nn_full.len() - 2);
    }

    #[test]
    fn constant_has_no_beats() {
        let flat = conditioned(vec![500.0; 128 * 20]);
        assert!(matches!(detect_ppg_peaks(&flat), Err(Error::NoBeats(_))));
    }

    #[test]
    fn short_record_rejected() {
        let b = SampleBlock::mono(SignalKind::Ppg, 0.0, 128.0, vec![0.0; 128 * 19]).unwrap();
        assert!(matches!(detect_ppg_peaks(&b), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn nn_series_range() {
        assert!(NNSeries::new(vec![800.0, 299.0]).is_err());
        assert!(NNSeries::new(vec![800.0, 2000.0]).is_ok());
    }
}
