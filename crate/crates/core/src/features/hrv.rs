//! Time-domain heart rate variability statistics.
//!
//! Conventions:
//! - SDNN and SDSD are sample standard deviations (ddof 1).
//! - RMSSD is the root mean square of successive differences.
//! - MadNN is the median absolute deviation scaled by 1.4826.
//! - IQRNN uses linearly interpolated quartiles.
//! - pNN50 / pNN20 are percentages of successive differences whose magnitude exceeds 50 / 20 ms.
//! - HTI and TINN use a histogram anchored at the shortest interval with 7.8125 ms bins
//!   (1/128 s). TINN is the base width of the least-squares triangle fitted to it.

use super::{mean, std_sample, FeatureVector, NNSeries};
use crate::error::{Error, Result};
use crate::signal::SignalKind;

pub const HTI_BIN_WIDTH_MS: f64 = 7.8125;
pub const MAD_SCALE: f64 = 1.4826;
/// Histogram statistics need this many intervals.
pub const MIN_HISTOGRAM_INTERVALS: usize = 20;

pub const HRV_FEATURE_NAMES: [&str; 14] = [
    "HRV_MeanNN",
    "HRV_SDNN",
    "HRV_RMSSD",
    "HRV_SDSD",
    "HRV_CVNN",
    "HRV_MedianNN",
    "HRV_CVSD",
    "HRV_MadNN",
    "HRV_MCVNN",
    "HRV_IQRNN",
    "HRV_pNN50",
    "HRV_pNN20",
    "HRV_HTI",
    "HRV_TINN",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrvStats {
    pub mean_nn: f64,
    pub sdnn: f64,
    pub rmssd: f64,
    pub sdsd: f64,
    pub cvnn: f64,
    pub median_nn: f64,
    pub cvsd: f64,
    pub mad_nn: f64,
    pub mcvnn: f64,
    pub iqr_nn: f64,
    pub pnn50: f64,
    pub pnn20: f64,
    pub hti: f64,
    pub tinn: f64,
}

impl HrvStats {
    pub fn compute(nn: &NNSeries) -> Result<Self> {
        let x = nn.intervals_ms();
        need(x.len(), 2, "HRV_MeanNN")?;
        need(x.len(), 3, "HRV_SDSD")?;
        need(x.len(), MIN_HISTOGRAM_INTERVALS, "HRV_HTI")?;

        let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mean_nn = mean(x);
        let sdnn = std_sample(x);
        let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
        let sdsd = std_sample(&diffs);

        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median_nn = quantile_sorted(&sorted, 0.5);
        let mut abs_dev: Vec<f64> = x.iter().map(|v| (v - median_nn).abs()).collect();
        abs_dev.sort_by(f64::total_cmp);
        let mad_nn = MAD_SCALE * quantile_sorted(&abs_dev, 0.5);
        let iqr_nn = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);

        let pct_over = |limit: f64| 100.0 * diffs.iter().filter(|d| d.abs() > limit).count() as f64 / diffs.len() as f64;

        let hist = Histogram::new(&sorted, HTI_BIN_WIDTH_MS);
        Ok(Self {
            mean_nn,
            sdnn,
            rmssd,
            sdsd,
            cvnn: sdnn / mean_nn,
            median_nn,
            cvsd: rmssd / mean_nn,
            mad_nn,
            mcvnn: mad_nn / median_nn,
            iqr_nn,
            pnn50: pct_over(50.0),
            pnn20: pct_over(20.0),
            hti: x.len() as f64 / hist.max_count() as f64,
            tinn: hist.triangular_width(),
        })
    }

    /// Values in [`HRV_FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 14] {
        [
            self.mean_nn,
            self.sdnn,
            self.rmssd,
            self.sdsd,
            self.cvnn,
            self.median_nn,
            self.cvsd,
            self.mad_nn,
            self.mcvnn,
            self.iqr_nn,
            self.pnn50,
            self.pnn20,
            self.hti,
            self.tinn,
        ]
    }
}

fn need(have: usize, want: usize, stat: &str) -> Result<()> {
    if have < want {
        Err(Error::insufficient(stat, format!("{want} intervals"), format!("{have} intervals")))
    } else {
        Ok(())
    }
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

struct Histogram {
    origin: f64,
    width: f64,
    counts: Vec<usize>,
}

impl Histogram {
    fn new(sorted: &[f64], width: f64) -> Self {
        let origin = sorted[0];
        let bins = ((sorted[sorted.len() - 1] - origin) / width).floor() as usize + 1;
        let mut counts = vec![0; bins];
        for v in sorted {
            let k = (((v - origin) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { origin, width, counts }
    }

    fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    fn edge(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.width
    }

    /// Base width `M - N` of the triangle (0 at N, histogram peak at the
    /// modal bin centre, 0 at M) minimising squared error over bin centres.
    /// N ranges over edges left of the modal bin, M over edges right of it.
    fn triangular_width(&self) -> f64 {
        let peak_bin = self
            .counts
            .iter()
            .enumerate()
            .fold(0, |best, (k, &c)| if c > self.counts[best] { k } else { best });
        let peak_t = self.edge(peak_bin) + 0.5 * self.width;
        let peak_h = self.counts[peak_bin] as f64;

        let mut best: Option<(f64, f64)> = None;
        for n_edge in 0..=peak_bin {
            let n = self.edge(n_edge);
            for m_edge in peak_bin + 1..=self.counts.len() {
                let m = self.edge(m_edge);
                let err: f64 = self
                    .counts
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        let t = self.edge(k) + 0.5 * self.width;
                        let q = if t <= n || t >= m {
                            0.0
                        } else if t <= peak_t {
                            peak_h * (t - n) / (peak_t - n)
                        } else {
                            peak_h * (m - t) / (m - peak_t)
                        };
                        (c as f64 - q).powi(2)
                    })
                    .sum();
                if best.is_none_or(|(e, _)| err < e) {
                    best = Some((err, m - n));
                }
            }
        }
        best.map_or(0.0, |(_, w)| w)
    }
}

/// The fourteen time-domain HRV features.
pub fn hrv_features(nn: &NNSeries) -> Result<FeatureVector> {
    let stats = HrvStats::compute(nn)?;
    let span_s = nn.intervals_ms().iter().sum::<f64>() / 1000.0;
    FeatureVector::from_static(SignalKind::Ppg, &HRV_FEATURE_NAMES, stats.values().to_vec(), 0.0, span_s)
}
