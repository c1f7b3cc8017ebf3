//! Per-modality signal conditioning, shared by training and the real-time path.

mod filter;

pub use filter::{FilterKind, FilterSpec, Sos};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{SampleBlock, SignalKind};

/// Shortest block any conditioning filter accepts.
pub const MIN_FILTER_SECONDS: f64 = 2.0;
pub const MIN_EEG_SAMPLE_RATE: f64 = 100.0;

/// Filter settings for every modality, exposed through the engine config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub eeg: FilterSpec,
    pub ppg: FilterSpec,
    pub eda: FilterSpec,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            eeg: FilterSpec::bandpass(1.0, 45.0, 4),
            ppg: FilterSpec::bandpass(0.5, 8.0, 2),
            eda: FilterSpec::lowpass(1.0, 2),
        }
    }
}

/// Conditioned EDA plus the number of negative-conductance runs that were clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct EdaConditioned {
    pub block: SampleBlock,
    pub clamp_warnings: usize,
}

fn expect_kind(block: &SampleBlock, kind: SignalKind) -> Result<()> {
    if block.kind() != kind {
        return Err(Error::Validation(format!("expected a {kind} block, got {}", block.kind())));
    }
    Ok(())
}

fn check_length(block: &SampleBlock) -> Result<()> {
    if block.duration() + 1e-9 < MIN_FILTER_SECONDS {
        return Err(Error::insufficient(
            format!("{} filter warm-up", block.kind()),
            format!("{MIN_FILTER_SECONDS} s"),
            format!("{:.3} s", block.duration()),
        ));
    }
    Ok(())
}

/// Applies `spec` to every channel of `block`.
pub fn apply_filter(block: &SampleBlock, spec: &FilterSpec) -> Result<SampleBlock> {
    let sos = spec.design(block.sample_rate())?;
    let rows = block
        .data()
        .iter()
        .map(|row| {
            if spec.zero_phase {
                sos.filtfilt(row, sos.default_padlen())
            } else {
                sos.filter(row)
            }
        })
        .collect();
    block.with_data(rows)
}

/// Removes each channel's mean, then band-passes.
pub fn preprocess_eeg(block: &SampleBlock, spec: &FilterSpec) -> Result<SampleBlock> {
    expect_kind(block, SignalKind::Eeg)?;
    if block.sample_rate() < MIN_EEG_SAMPLE_RATE {
        return Err(Error::Validation(format!(
            "EEG sample rate {} Hz is below {MIN_EEG_SAMPLE_RATE} Hz",
            block.sample_rate()
        )));
    }
    check_length(block)?;
    let centred = block
        .data()
        .iter()
        .map(|row| {
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter().map(|v| v - mean).collect()
        })
        .collect();
    apply_filter(&block.with_data(centred)?, spec)
}

pub fn preprocess_ppg(block: &SampleBlock, spec: &FilterSpec) -> Result<SampleBlock> {
    expect_kind(block, SignalKind::Ppg)?;
    check_length(block)?;
    apply_filter(block, spec)
}

/// Low-passes skin conductance and clamps negative values to zero.
///
/// Each contiguous run of negative output counts as one warning.
pub fn preprocess_eda(block: &SampleBlock, spec: &FilterSpec) -> Result<EdaConditioned> {
    expect_kind(block, SignalKind::Eda)?;
    check_length(block)?;
    let filtered = apply_filter(block, spec)?;
    let mut clamp_warnings = 0;
    let rows = filtered
        .data()
        .iter()
        .map(|row| {
            let mut in_run = false;
            row.iter()
                .map(|&v| {
                    if v < 0.0 {
                        if !in_run {
                            clamp_warnings += 1;
                            in_run = true;
                        }
                        0.0
                    } else {
                        in_run = false;
                        v
                    }
                })
                .collect()
        })
        .collect();
    if clamp_warnings > 0 {
        log::warn!("EDA block at {:.2} s: clamped {clamp_warnings} negative run(s) to 0", block.start_time());
    }
    Ok(EdaConditioned {
        block: filtered.with_data(rows)?,
        clamp_warnings,
    })
}
