//! Window-level training sets from labelled trials and the six-model fit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{expected_event_count, is_data_shortfall, slice_window, window_features, EngineConfig};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::model::{binarize_arousal, binarize_valence, train, BinaryLevel, Dimension, ModelSet, TrainingSet, ValenceMode};
use crate::signal::{SignalKind, TrialRecord};

/// Binarized (arousal, valence) of a trial's self-report.
pub fn trial_levels(trial: &TrialRecord, mode: ValenceMode) -> Result<(BinaryLevel, BinaryLevel)> {
    let l = trial.label();
    Ok((
        binarize_arousal(i64::from(l.arousal_rate()))?,
        binarize_valence(i64::from(l.valence_rate()), mode)?,
    ))
}

/// Features of every engine window of `trial` for `kind`, skipping windows
/// whose signal yields nothing usable.
pub fn trial_window_features(trial: &TrialRecord, kind: SignalKind, config: &EngineConfig) -> Result<Vec<FeatureVector>> {
    let Some(blocks) = trial.stream(kind) else {
        return Ok(Vec::new());
    };
    let n = expected_event_count(trial.end_time(), config);
    let first = (config.window_seconds / config.hop_seconds - 1e-9).ceil();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let end = (first + i as f64) * config.hop_seconds;
        let Some(block) = slice_window(blocks, end - config.window_seconds, end) else {
            continue;
        };
        match window_features(&block, &config.filters) {
            Ok(fv) => out.push(fv),
            Err(e) if is_data_shortfall(&e) => {
                log::debug!("{} {kind} window ending {end} s skipped: {e}", trial.trial_id());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Labelled window examples per modality.
pub type Examples = BTreeMap<SignalKind, Vec<(FeatureVector, BinaryLevel, BinaryLevel)>>;

pub fn build_examples(trials: &[TrialRecord], config: &EngineConfig) -> Result<Examples> {
    let per_trial: Vec<Vec<(SignalKind, FeatureVector, BinaryLevel, BinaryLevel)>> = trials
        .par_iter()
        .map(|t| {
            let (a, v) = trial_levels(t, config.valence_mode)?;
            let mut rows = Vec::new();
            for kind in SignalKind::ALL {
                for fv in trial_window_features(t, kind, config)? {
                    rows.push((kind, fv, a, v));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut examples = Examples::new();
    for (kind, fv, a, v) in per_trial.into_iter().flatten() {
        examples.entry(kind).or_default().push((fv, a, v));
    }
    Ok(examples)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub modality: SignalKind,
    pub dimension: Dimension,
    pub examples: usize,
    pub high_examples: usize,
    pub training_accuracy: f64,
}

/// Fits one forest per (modality, dimension) that has window examples.
/// Modalities absent from every trial are skipped with a warning.
pub fn train_models(trials: &[TrialRecord], config: &EngineConfig, seed: u64) -> Result<(ModelSet, Vec<ModelSummary>)> {
    config.validate()?;
    if trials.is_empty() {
        return Err(Error::Training("no trials to train on".into()));
    }
    let examples = build_examples(trials, config)?;
    let mut set = ModelSet::new(config.valence_mode);
    let mut summaries = Vec::new();
    for kind in SignalKind::ALL {
        let Some(rows) = examples.get(&kind).filter(|r| !r.is_empty()) else {
            log::warn!("no usable {kind} windows in the dataset; skipping {kind} models");
            continue;
        };
        for dim in Dimension::ALL {
            let labelled: Vec<(FeatureVector, BinaryLevel)> = rows
                .iter()
                .map(|(fv, a, v)| (fv.clone(), if dim == Dimension::Arousal { *a } else { *v }))
                .collect();
            let ts = TrainingSet::from_examples(&labelled)?;
            let model = train(&ts, dim, config.hyperparams, seed)
                .map_err(|e| Error::Training(format!("{kind} {dim} model: {e}")))?;
            let correct = labelled
                .iter()
                .filter(|(fv, l)| model.predict_row(fv.values()) == *l)
                .count();
            summaries.push(ModelSummary {
                modality: kind,
                dimension: dim,
                examples: labelled.len(),
                high_examples: labelled.iter().filter(|(_, l)| *l == BinaryLevel::High).count(),
                training_accuracy: 100.0 * correct as f64 / labelled.len() as f64,
            });
            set.insert(model);
        }
    }
    if set.is_empty() {
        return Err(Error::Training("no modality produced usable training windows".into()));
    }
    Ok((set, summaries))
}
