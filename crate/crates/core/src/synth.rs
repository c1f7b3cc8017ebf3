//! Seeded synthetic trials with class-dependent physiological signatures.
//!
//! Every trial belongs to one quadrant. Signatures switch on for the "high"
//! side of a dimension only, so zero effect sizes give identical class
//! distributions:
//!
//! | effect                | modality | high side                              |
//! |-----------------------|----------|----------------------------------------|
//! | `arousal_eda_scr`     | EDA      | extra SCRs per minute, larger bumps    |
//! | `arousal_hrv`         | PPG      | NN dispersion shrinks by this fraction |
//! | `arousal_eeg_beta`    | EEG      | 20 Hz amplitude added, µV              |
//! | `valence_eeg_alpha`   | EEG      | 10 Hz amplitude added, µV              |
//! | `valence_heart_rate`  | PPG      | heart rate added, bpm                  |
//! | `valence_eda_tonic`   | EDA      | tonic level added, µS                  |
//!
//! "High valence" here is the trial's category; its self-report rates 4 or 5,
//! whatever polarity binarization later assigns to that.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Quadrant, SampleBlock, SelfReportLabel, SignalKind, SpeechSpan, TrialRecord};

pub const EEG_RATE: f64 = 250.0;
pub const PPG_RATE: f64 = 128.0;
pub const EDA_RATE: f64 = 128.0;
pub const EEG_CHANNELS: [&str; 8] = ["Fp1", "Fp2", "F3", "F4", "C3", "C4", "O1", "O2"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectSizes {
    pub arousal_eda_scr: f64,
    pub arousal_hrv: f64,
    pub arousal_eeg_beta: f64,
    pub valence_eeg_alpha: f64,
    pub valence_heart_rate: f64,
    pub valence_eda_tonic: f64,
}

impl Default for EffectSizes {
    fn default() -> Self {
        Self::STRONG
    }
}

impl EffectSizes {
    pub const ZERO: EffectSizes = EffectSizes {
        arousal_eda_scr: 0.0,
        arousal_hrv: 0.0,
        arousal_eeg_beta: 0.0,
        valence_eeg_alpha: 0.0,
        valence_heart_rate: 0.0,
        valence_eda_tonic: 0.0,
    };

    pub const STRONG: EffectSizes = EffectSizes {
        arousal_eda_scr: 8.0,
        arousal_hrv: 0.75,
        arousal_eeg_beta: 6.0,
        valence_eeg_alpha: 8.0,
        valence_heart_rate: 18.0,
        valence_eda_tonic: 3.0,
    };

    fn validate(&self) -> Result<()> {
        let all = [
            self.arousal_eda_scr,
            self.arousal_hrv,
            self.arousal_eeg_beta,
            self.valence_eeg_alpha,
            self.valence_heart_rate,
            self.valence_eda_tonic,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation("effect sizes must be finite and >= 0".into()));
        }
        if self.arousal_hrv >= 1.0 {
            return Err(Error::Validation("arousal_hrv is a fraction and must be < 1".into()));
        }
        Ok(())
    }
}

/// Additive white-noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseLevels {
    pub eeg_uv: f64,
    pub ppg: f64,
    pub eda_us: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        Self {
            eeg_uv: 5.0,
            ppg: 0.05,
            eda_us: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub trials_per_quadrant: usize,
    pub duration_s: f64,
    pub effects: EffectSizes,
    pub noise: NoiseLevels,
    /// When false, trials carry PPG and EDA only.
    pub include_eeg: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::strong(42, 40)
    }
}

impl SynthSpec {
    /// The preset used for end-to-end learnability checks.
    pub fn strong(seed: u64, trials_per_quadrant: usize) -> Self {
        Self {
            seed,
            trials_per_quadrant,
            duration_s: 30.0,
            effects: EffectSizes::STRONG,
            noise: NoiseLevels::default(),
            include_eeg: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.effects.validate()?;
        let n = self.noise;
        if [n.eeg_uv, n.ppg, n.eda_us].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation("noise levels must be finite and >= 0".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 20.0) {
            return Err(Error::Validation(format!("duration must be >= 20 s, got {}", self.duration_s)));
        }
        if self.trials_per_quadrant == 0 {
            return Err(Error::Validation("trials_per_quadrant must be >= 1".into()));
        }
        Ok(())
    }
}

/// Rounds to a fixed number of decimals so text files stay short.
fn quantize(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    let q = (v * s).round() / s;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative sd")
}

fn eeg(rng: &mut ChaCha8Rng, spec: &SynthSpec, q: Quadrant, n: usize) -> Result<SampleBlock> {
    let e = &spec.effects;
    let noise = normal(spec.noise.eeg_uv);
    let gain = rng.random_range(0.8..1.25);
    let alpha = gain * (2.0 + if q.high_valence() { e.valence_eeg_alpha } else { 0.0 });
    let beta = gain * (1.5 + if q.high_arousal() { e.arousal_eeg_beta } else { 0.0 });
    let mut rows = Vec::with_capacity(EEG_CHANNELS.len());
    for _ in EEG_CHANNELS {
        // Background rhythm: a few low-frequency components with 1/f amplitudes.
        let bg: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| {
                let f: f64 = rng.random_range(1.0..40.0);
                (f, 6.0 / f.sqrt(), rng.random_range(0.0..TAU))
            })
            .collect();
        let (pa, pb) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
        let fa = rng.random_range(9.5..10.5);
        let fb = rng.random_range(18.0..22.0);
        let offset = rng.random_range(-20.0..20.0);
        let row = (0..n)
            .map(|i| {
                let t = i as f64 / EEG_RATE;
                let mut v = offset + alpha * (TAU * fa * t + pa).sin() + beta * (TAU * fb * t + pb).sin();
                for (f, a, p) in &bg {
                    v += a * (TAU * f * t + p).sin();
                }
                quantize(v + noise.sample(rng), 2)
            })
            .collect();
        rows.push(row);
    }
    SampleBlock::new(SignalKind::Eeg, 0.0, EEG_RATE, EEG_CHANNELS.iter().map(|s| s.to_string()).collect(), rows)
}

fn ppg(rng: &mut ChaCha8Rng, spec: &SynthSpec, q: Quadrant, n: usize) -> Result<SampleBlock> {
    let e = &spec.effects;
    let hr = rng.random_range(66.0..74.0) + if q.high_valence() { e.valence_heart_rate } else { 0.0 };
    let mean_nn = 60.0 / hr;
    let sd = rng.random_range(0.035..0.045) * if q.high_arousal() { 1.0 - e.arousal_hrv } else { 1.0 };
    let jitter = normal(sd);
    let duration = n as f64 / PPG_RATE;
    let mut beats = Vec::new();
    let mut t = rng.random_range(0.1..0.6);
    while t < duration + 1.0 {
        beats.push(t);
        t += (mean_nn + jitter.sample(rng)).clamp(0.45, 1.5);
    }
    let amp = rng.random_range(0.8..1.2);
    let wander_phase = rng.random_range(0.0..TAU);
    let noise = normal(spec.noise.ppg);
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / PPG_RATE;
            2.0 + 0.2 * (TAU * 0.15 * t + wander_phase).sin() + noise.sample(rng)
        })
        .collect();
    // Each beat: systolic Gaussian plus a smaller dicrotic wave, added only near the beat.
    let reach = (0.8 * PPG_RATE) as isize;
    for b in beats {
        let centre = (b * PPG_RATE).round() as isize;
        for i in (centre - reach).max(0)..(centre + reach).min(n as isize) {
            let d = i as f64 / PPG_RATE - b;
            x[i as usize] += amp * ((-(d * d) / (2.0 * 0.05f64.powi(2))).exp() + 0.3 * (-((d - 0.28).powi(2)) / (2.0 * 0.07f64.powi(2))).exp());
        }
    }
    SampleBlock::mono(SignalKind::Ppg, 0.0, PPG_RATE, x.into_iter().map(|v| quantize(v, 4)).collect())
}

fn eda(rng: &mut ChaCha8Rng, spec: &SynthSpec, q: Quadrant, n: usize) -> Result<SampleBlock> {
    let e = &spec.effects;
    let level = rng.random_range(2.0..4.0) + if q.high_valence() { e.valence_eda_tonic } else { 0.0 };
    let slope = rng.random_range(-0.01..0.01);
    let per_minute = 2.0 + if q.high_arousal() { e.arousal_eda_scr } else { 0.0 };
    let scale = if q.high_arousal() { 1.0 + 0.05 * e.arousal_eda_scr } else { 1.0 };
    let duration = n as f64 / EDA_RATE;
    let gap = Exp::new(per_minute / 60.0).expect("positive rate");
    let mut onsets = Vec::new();
    let mut t = gap.sample(rng) - 10.0;
    while t < duration {
        onsets.push((t, scale * rng.random_range(0.1..0.4)));
        t += gap.sample(rng);
    }
    let noise = normal(spec.noise.eda_us);
    let (rise, decay): (f64, f64) = (0.5, 1.5);
    // Peak of exp(-u/decay) - exp(-u/rise), used to normalise bump height.
    let u_peak = rise * decay / (decay - rise) * (decay / rise).ln();
    let norm = (-u_peak / decay).exp() - (-u_peak / rise).exp();
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / EDA_RATE;
            let scr: f64 = onsets
                .iter()
                .filter(|(o, _)| t >= *o && t - o < 30.0)
                .map(|(o, a)| a * ((-(t - o) / decay).exp() - (-(t - o) / rise).exp()) / norm)
                .sum();
            quantize((level + slope * t + scr + noise.sample(rng)).max(0.0), 4)
        })
        .collect();
    SampleBlock::mono(SignalKind::Eda, 0.0, EDA_RATE, x)
}

fn label(rng: &mut ChaCha8Rng, q: Quadrant) -> Result<SelfReportLabel> {
    let mut rate = |high: bool| if high { rng.random_range(4..=5) } else { rng.random_range(1..=3) };
    let a = rate(q.high_arousal());
    let v = rate(q.high_valence());
    SelfReportLabel::new(a, v)
}

/// Trial id for the `i`-th trial of quadrant `q`.
pub fn trial_id(q: Quadrant, i: usize) -> String {
    format!("{}-{:03}", q, i)
}

/// One trial; trial `i` of quadrant `q` always gets the same RNG stream.
pub fn generate_trial(spec: &SynthSpec, q: Quadrant, i: usize) -> Result<TrialRecord> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream((q as u64) << 32 | i as u64);
    let label = label(&mut rng, q)?;
    let mut streams = BTreeMap::new();
    if spec.include_eeg {
        let n = (spec.duration_s * EEG_RATE).round() as usize;
        streams.insert(SignalKind::Eeg, vec![eeg(&mut rng, spec, q, n)?]);
    }
    let n = (spec.duration_s * PPG_RATE).round() as usize;
    streams.insert(SignalKind::Ppg, vec![ppg(&mut rng, spec, q, n)?]);
    let n = (spec.duration_s * EDA_RATE).round() as usize;
    streams.insert(SignalKind::Eda, vec![eda(&mut rng, spec, q, n)?]);
    let spans = vec![SpeechSpan {
        start: 1.0,
        end: spec.duration_s - 0.5,
    }];
    TrialRecord::new(trial_id(q, i), q, streams, label, spans)
}

/// All trials, quadrant by quadrant, in a deterministic order.
pub fn generate(spec: &SynthSpec) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let keys: Vec<(Quadrant, usize)> = Quadrant::ALL
        .into_iter()
        .flat_map(|q| (0..spec.trials_per_quadrant).map(move |i| (q, i)))
        .collect();
    keys.par_iter().map(|(q, i)| generate_trial(spec, *q, *i)).collect()
}
