//! One window through conditioning, feature extraction and the per-modality forests.

use crate::error::{Error, Result};
use crate::features::{detect_ppg_peaks, eda_decompose, eda_features, eeg_band_psd, hrv_features, FeatureVector};
use crate::model::{ModalityPrediction, ModelSet};
use crate::preprocess::{preprocess_eda, preprocess_eeg, preprocess_ppg, PreprocessConfig};
use crate::signal::{SampleBlock, SignalKind};

/// Concatenates the samples of `blocks` that fall in `[start, end)`.
///
/// Returns `None` unless the samples are gap-free and cover the whole span
/// (one sample of slack for non-integer `(end - start) * rate`).
pub fn slice_window<'a>(blocks: impl IntoIterator<Item = &'a SampleBlock>, start: f64, end: f64) -> Option<SampleBlock> {
    let mut pieces: Vec<SampleBlock> = Vec::new();
    for b in blocks {
        if b.is_empty() || b.end_time() <= start || b.start_time() >= end {
            continue;
        }
        let (i0, i1) = (b.index_at(start), b.index_at(end));
        if i1 > i0 {
            pieces.push(b.slice(i0..i1));
        }
    }
    let first = pieces.first()?;
    let fs = first.sample_rate();
    let half = 0.5 / fs;
    if first.start_time() - start > half {
        return None;
    }
    if pieces.windows(2).any(|w| !w[0].is_continued_by(&w[1])) {
        return None;
    }
    let n: usize = pieces.iter().map(SampleBlock::n_samples).sum();
    let expected = ((end - start) * fs).round() as usize;
    if n + 1 < expected {
        return None;
    }
    if pieces.len() == 1 {
        return pieces.pop();
    }
    let rows = (0..first.channels().len())
        .map(|c| pieces.iter().flat_map(|p| p.channel(c).iter().copied()).collect())
        .collect();
    first.with_data(rows).ok()
}

/// Conditioning and features for one modality's window.
pub fn window_features(block: &SampleBlock, filters: &PreprocessConfig) -> Result<FeatureVector> {
    let fv = match block.kind() {
        SignalKind::Eeg => eeg_band_psd(&preprocess_eeg(block, &filters.eeg)?)?,
        SignalKind::Ppg => hrv_features(&detect_ppg_peaks(&preprocess_ppg(block, &filters.ppg)?)?)?,
        SignalKind::Eda => {
            let conditioned = preprocess_eda(block, &filters.eda)?;
            let c = eda_decompose(&conditioned.block)?;
            eda_features(&c.tonic, &c.phasic, c.sample_rate)?
        }
    };
    Ok(fv.at_window(block.start_time(), block.duration()))
}

/// Errors that mean "this modality has nothing usable in this window".
pub fn is_data_shortfall(e: &Error) -> bool {
    matches!(e, Error::InsufficientData { .. } | Error::NoBeats(_))
}

/// Per-modality predictions for one window. Modalities without a slice,
/// without models, or whose signal yields no usable features are left out.
pub fn predict_window(slices: &[(SignalKind, Option<SampleBlock>)], models: &ModelSet, filters: &PreprocessConfig) -> Result<Vec<ModalityPrediction>> {
    let mut out = Vec::with_capacity(slices.len());
    for (kind, slice) in slices {
        let Some(block) = slice else { continue };
        if !models.modalities().contains(kind) {
            continue;
        }
        match window_features(block, filters) {
            Ok(fv) => {
                if let Some(p) = models.predict(&fv)? {
                    out.push(p);
                }
            }
            Err(e) if is_data_shortfall(&e) => {
                log::debug!("{kind} window at {:.1} s skipped: {e}", block.start_time());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
