#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use affect_core::engine::EngineConfig;
use affect_core::model::{Hyperparams, ModelSet};
use affect_core::signal::TrialRecord;
use affect_core::synth::{generate, SynthSpec};
use affect_core::training::train_models;

pub fn small_config() -> EngineConfig {
    EngineConfig {
        hyperparams: Hyperparams {
            n_trees: 15,
            max_depth: 6,
            ..Hyperparams::default()
        },
        ..EngineConfig::default()
    }
}

/// Models trained once per test binary on a small strong-effect dataset.
pub fn small_models() -> (EngineConfig, Arc<ModelSet>) {
    static MODELS: OnceLock<Arc<ModelSet>> = OnceLock::new();
    let config = small_config();
    let models = MODELS.get_or_init(|| {
        let trials = generate(&SynthSpec::strong(11, 4)).unwrap();
        let (set, _) = train_models(&trials, &config, 5).unwrap();
        Arc::new(set)
    });
    (config, Arc::clone(models))
}

pub fn strong_trials(seed: u64, per_quadrant: usize, duration_s: f64) -> Vec<TrialRecord> {
    let spec = SynthSpec {
        duration_s,
        ..SynthSpec::strong(seed, per_quadrant)
    };
    generate(&spec).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale.max(1e-300) || (a - b).abs() <= 1e-300
}
