//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test fails
//! if any criterion does.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use affect_core::alignment::{AlignmentReport, Source};
use affect_core::dataset::{save_dataset, Split};
use affect_core::engine::{
    expected_event_count, read_event_log, replay_with, write_event_log, EmotionEvent, EngineConfig, ManualClock, Speed,
    Window,
    WallClock,
};
use affect_core::features::{
    band_powers, eda_decompose, find_phasic_peaks, hrv_features, HrvStats, NNSeries, HRV_FEATURE_NAMES,
    EDA_FEATURE_NAMES, MIN_PEAK_PROMINENCE, PSD_FEATURE_NAMES,
};
use affect_core::fusion::{fuse, majority_emotion, quadrant_levels, EmotionState, FusionWeights, RawScores};
use affect_core::model::{
    binarize_arousal, binarize_valence, BinaryLevel, Dimension, ForestModel, Hyperparams, ModalityPrediction, ModelSet,
    Node, ValenceMode,
};
use affect_core::signal::{Quadrant, SampleBlock, SignalKind, TrialRecord};
use affect_core::synth::{generate, generate_trial, SynthSpec};
use affect_orchestrator::{serve, Envelope, Message, Mode, Phase, ResponseDb, ServerConfig, Session, SessionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn report(line: &str) {
    // Straight to the process stderr so the lines show without --nocapture.
    let _ = std::io::stderr().write_all(format!("{line}\n").as_bytes());
}

fn workdir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

fn affect(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_affect")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let out = affect(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`affect {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

// ---------- 1. fusion ----------

const ORDER: [SignalKind; 3] = [SignalKind::Eeg, SignalKind::Eda, SignalKind::Ppg];

fn level(bit: bool) -> BinaryLevel {
    if bit {
        BinaryLevel::High
    } else {
        BinaryLevel::Low
    }
}

fn fusion_enumeration() -> Check {
    let started = Instant::now();
    let wa = FusionWeights::AROUSAL_DEFAULT;
    let wv = FusionWeights::VALENCE_DEFAULT;
    ensure!(
        [wa.eeg, wa.eda, wa.ppg] == [1.0, 2.0, 2.0] && [wv.eeg, wv.eda, wv.ppg] == [1.0, 1.0, 1.0],
        "default weights changed"
    );
    let sum = |bits: u8, w: [f64; 3]| -> f64 {
        let mut s = 0.0;
        for (i, wi) in w.iter().enumerate() {
            s += if bits >> i & 1 == 1 { *wi } else { -*wi };
        }
        s
    };
    let mut combos = 0;
    for a in 0..8u8 {
        for v in 0..8u8 {
            let preds: Vec<ModalityPrediction> = ORDER
                .iter()
                .enumerate()
                .map(|(i, k)| ModalityPrediction {
                    modality: *k,
                    arousal: level(a >> i & 1 == 1),
                    valence: level(v >> i & 1 == 1),
                })
                .collect();
            let state = fuse(&preds, &wa, &wv, 0.0).map_err(|e| e.to_string())?;
            let pa = sum(a, [1.0, 2.0, 2.0]);
            let pv = sum(v, [1.0, 1.0, 1.0]);
            ensure!(pa != 0.0 && pv != 0.0, "zero sum at a={a:03b} v={v:03b}");
            ensure!(
                state.raw_scores.arousal == pa && state.raw_scores.valence == pv,
                "raw scores at a={a:03b} v={v:03b}: {:?}",
                state.raw_scores
            );
            let want_a = if pa < 0.0 { -1 } else { 1 };
            let want_v = if pv < 0.0 { -1 } else { 1 };
            ensure!(
                state.arousal.value() == want_a && state.valence.value() == want_v,
                "levels at a={a:03b} v={v:03b}"
            );
            let q = match (want_a, want_v) {
                (1, 1) => Quadrant::HAHV,
                (1, _) => Quadrant::HALV,
                (_, 1) => Quadrant::LAHV,
                _ => Quadrant::LALV,
            };
            ensure!(state.quadrant == q, "quadrant at a={a:03b} v={v:03b}");
            combos += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{combos} combinations, {elapsed:?}"))
}

// ---------- 2. binarization ----------

fn binarization_table() -> Check {
    use BinaryLevel::{High, Low};
    let arousal = [Low, Low, Low, High, High];
    let literal = [High, High, High, Low, Low];
    let conventional = [Low, Low, Low, High, High];
    for r in 1..=5i64 {
        let i = (r - 1) as usize;
        let a = binarize_arousal(r).map_err(|e| e.to_string())?;
        let l = binarize_valence(r, ValenceMode::PaperLiteral).map_err(|e| e.to_string())?;
        let c = binarize_valence(r, ValenceMode::Conventional).map_err(|e| e.to_string())?;
        ensure!(a == arousal[i], "arousal rate {r}: {a:?}");
        ensure!(l == literal[i], "literal valence rate {r}: {l:?}");
        ensure!(c == conventional[i], "conventional valence rate {r}: {c:?}");
    }
    for bad in [0, 6] {
        ensure!(binarize_arousal(bad).is_err(), "rate {bad} accepted");
    }
    Ok("15 cells exact".into())
}

// ---------- 3. HRV ----------

fn o_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn o_sd(x: &[f64]) -> f64 {
    let m = o_mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn o_quantile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let h = p * (s.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

fn o_histogram(x: &[f64], w: f64) -> (f64, Vec<f64>) {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bins = ((hi - lo) / w).floor() as usize + 1;
    let mut h = vec![0.0; bins];
    for v in x {
        h[(((v - lo) / w).floor() as usize).min(bins - 1)] += 1.0;
    }
    (lo, h)
}

/// Least-squares triangle over every (N, M) pair of bin edges around the mode.
fn o_tinn(x: &[f64], w: f64) -> f64 {
    let (lo, h) = o_histogram(x, w);
    let mode = (0..h.len()).fold(0, |m, k| if h[k] > h[m] { k } else { m });
    let mid = |k: usize| lo + (k as f64 + 0.5) * w;
    let (xp, yp) = (mid(mode), h[mode]);
    let mut best = (f64::INFINITY, 0.0);
    for a in 0..=mode {
        for b in mode + 1..=h.len() {
            let (n, m) = (lo + a as f64 * w, lo + b as f64 * w);
            let err: f64 = (0..h.len())
                .map(|k| {
                    let t = mid(k);
                    let tri = if t > n && t <= xp {
                        yp * (t - n) / (xp - n)
                    } else if t > xp && t < m {
                        yp * (m - t) / (m - xp)
                    } else {
                        0.0
                    };
                    (h[k] - tri).powi(2)
                })
                .sum();
            if err < best.0 {
                best = (err, m - n);
            }
        }
    }
    best.1
}

fn hrv_oracle(x: &[f64]) -> [f64; 14] {
    let d: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let mean = o_mean(x);
    let sdnn = o_sd(x);
    let rmssd = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
    let median = o_quantile(x, 0.5);
    let abs_dev: Vec<f64> = x.iter().map(|v| (v - median).abs()).collect();
    let mad = 1.4826 * o_quantile(&abs_dev, 0.5);
    let pnn = |ms: f64| 100.0 * d.iter().filter(|v| v.abs() > ms).count() as f64 / d.len() as f64;
    let w = 1000.0 / 128.0;
    let peak = o_histogram(x, w).1.into_iter().fold(0.0, f64::max);
    [
        mean,
        sdnn,
        rmssd,
        o_sd(&d),
        sdnn / mean,
        median,
        rmssd / mean,
        mad,
        mad / median,
        o_quantile(x, 0.75) - o_quantile(x, 0.25),
        pnn(50.0),
        pnn(20.0),
        x.len() as f64 / peak,
        o_tinn(x, w),
    ]
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) || a == b
}

fn hrv_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let n = rng.random_range(20..150);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(550.0..1100.0)).collect();
        let got = HrvStats::compute(&NNSeries::new(x.clone()).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?
            .values();
        let want = hrv_oracle(&x);
        for (i, name) in HRV_FEATURE_NAMES.iter().enumerate() {
            ensure!(rel_close(got[i], want[i], 1e-9), "case {case} {name}: {} vs oracle {}", got[i], want[i]);
        }
    }
    let fv = hrv_features(&NNSeries::new(vec![800.0; 40]).unwrap()).map_err(|e| e.to_string())?;
    for name in ["HRV_SDNN", "HRV_RMSSD", "HRV_SDSD", "HRV_pNN50", "HRV_pNN20", "HRV_IQRNN", "HRV_MadNN"] {
        ensure!(fv.get(name) == Some(0.0), "constant series {name} = {:?}", fv.get(name));
    }
    let alt: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 800.0 } else { 860.0 }).collect();
    let fv = hrv_features(&NNSeries::new(alt).unwrap()).map_err(|e| e.to_string())?;
    ensure!(fv.get("HRV_RMSSD") == Some(60.0), "RMSSD {:?}", fv.get("HRV_RMSSD"));
    ensure!(fv.get("HRV_pNN50") == Some(100.0), "pNN50 {:?}", fv.get("HRV_pNN50"));
    Ok("100 series x 14 features within 1e-9; fixtures exact".into())
}

// ---------- 4. PSD ----------

fn psd_attribution() -> Check {
    let fs = 250.0;
    let n = (20.0 * fs) as usize;
    let sine: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
    let block = SampleBlock::mono(SignalKind::Eeg, 0.0, fs, sine).map_err(|e| e.to_string())?;
    let p = band_powers(&block);
    let share = p[2] / p.iter().sum::<f64>();
    ensure!(PSD_FEATURE_NAMES[2] == "psd_alpha", "band order changed");
    ensure!(share >= 0.9, "alpha share {share}");
    let zeros = SampleBlock::mono(SignalKind::Eeg, 0.0, fs, vec![0.0; n]).map_err(|e| e.to_string())?;
    let z = band_powers(&zeros);
    ensure!(z.iter().all(|v| v.abs() <= 1e-12), "zeros give {z:?}");
    Ok(format!("alpha share {:.4}", share))
}

// ---------- 5. EDA ----------

fn eda_reconstruction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = rng.random_range(2560..8000);
        let base = rng.random_range(0.2..15.0);
        let amp = rng.random_range(0.01..2.0);
        let x: Vec<f64> = (0..n).map(|_| base + amp * rng.random_range(-1.0..1.0)).collect();
        let block = SampleBlock::mono(SignalKind::Eda, 0.0, 128.0, x.clone()).map_err(|e| e.to_string())?;
        let c = eda_decompose(&block).map_err(|e| e.to_string())?;
        for (i, xi) in x.iter().enumerate() {
            let err = (c.tonic[i] + c.phasic[i] - xi).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-9, "case {case} sample {i}: error {err}");
        }
    }
    let flat = SampleBlock::mono(SignalKind::Eda, 0.0, 128.0, vec![3.5; 128 * 30]).map_err(|e| e.to_string())?;
    let c = eda_decompose(&flat).map_err(|e| e.to_string())?;
    ensure!(c.phasic.iter().all(|v| v.abs() <= 1e-9), "constant input has phasic activity");
    ensure!(find_phasic_peaks(&c.phasic, MIN_PEAK_PROMINENCE).is_empty(), "constant input has peaks");
    ensure!(EDA_FEATURE_NAMES.contains(&"peaks_count"), "peaks_count missing");
    Ok(format!("worst reconstruction error {worst:.2e}"))
}

// ---------- 7. learnability, shared by 6 and 10 ----------

struct Pipeline {
    models: Result<Arc<ModelSet>, String>,
    report: Result<AlignmentReport, String>,
    wall: Duration,
}

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| {
        let dir = workdir();
        let ds = dir.join("learn_ds");
        let models = dir.join("learn_models");
        let out = dir.join("learn_report.json");
        let (ds_s, models_s, out_s) = (s(&ds), s(&models), s(&out));
        let started = Instant::now();
        let steps = run_ok(&["generate", "--seed", "42", "--preset", "strong", "--trials-per-quadrant", "40", "--out", &ds_s])
            .and_then(|_| run_ok(&["train", "--dataset", &ds_s, "--split", "train", "--out", &models_s]))
            .and_then(|_| {
                run_ok(&[
                    "evaluate-alignment",
                    "--dataset",
                    &ds_s,
                    "--split",
                    "test",
                    "--models",
                    &models_s,
                    "--out",
                    &out_s,
                ])
            });
        let wall = started.elapsed();
        let report = steps.and_then(|_| {
            let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
            serde_json::from_str(&text).map_err(|e| e.to_string())
        });
        let models = ModelSet::load_dir(&models).map(Arc::new).map_err(|e| e.to_string());
        Pipeline { models, report, wall }
    })
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn trained_models() -> Result<(EngineConfig, Arc<ModelSet>), String> {
    let models = pipeline().models.clone()?;
    let config = EngineConfig {
        valence_mode: models.valence_mode(),
        ..EngineConfig::default()
    };
    Ok((config, models))
}

fn learnability() -> Check {
    let p = pipeline();
    let report = p.report.clone()?;
    let mut details = Vec::new();
    for dim in Dimension::ALL {
        let mut best: f64 = 0.0;
        for src in [Source::Eeg, Source::Eda, Source::Ppg] {
            let acc = report.percent(src, dim).ok_or(format!("{src:?} {dim:?} not evaluated"))?;
            ensure!(acc >= 85.0, "{src:?} {dim:?} accuracy {acc:.1}% < 85%");
            best = best.max(acc);
        }
        let fused = report.percent(Source::Fused, dim).ok_or("fused not evaluated")?;
        ensure!(fused >= best - 2.0, "fused {dim:?} {fused:.1}% < best {best:.1}% - 2");
        details.push(format!("{dim:?} best {best:.1}% fused {fused:.1}%"));
    }
    ensure!(p.wall < Duration::from_secs(120), "pipeline took {:?}", p.wall);
    Ok(format!("{}; wall {:.1} s", details.join(", "), p.wall.as_secs_f64()))
}

// ---------- 6. cadence ----------

fn synth_trial(q: Quadrant, duration_s: f64, seed: u64) -> TrialRecord {
    let spec = SynthSpec {
        duration_s,
        ..SynthSpec::strong(seed, 1)
    };
    generate_trial(&spec, q, 0).unwrap()
}

fn truncate(t: &TrialRecord, end: f64) -> TrialRecord {
    let streams: BTreeMap<_, _> = t
        .streams()
        .iter()
        .map(|(k, blocks)| (*k, blocks.iter().map(|b| b.slice(0..b.index_at(end))).collect()))
        .collect();
    TrialRecord::new(t.trial_id(), t.topic_category(), streams, t.label(), t.speech_spans().to_vec()).unwrap()
}

/// Event log lines with the measured latency removed.
fn log_without_latency(events: &[EmotionEvent]) -> Result<Vec<String>, String> {
    let mut buf = Vec::new();
    write_event_log(&mut buf, events).map_err(|e| e.to_string())?;
    let back = read_event_log(buf.as_slice()).map_err(|e| e.to_string())?;
    ensure!(back.len() == events.len(), "event log round trip lost events");
    String::from_utf8(buf)
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
            v.as_object_mut().ok_or("event is not an object")?.remove("latency_ms");
            Ok(v.to_string())
        })
        .collect()
}

fn cadence_law() -> Check {
    let (config, models) = trained_models()?;
    let twenty = synth_trial(Quadrant::LALV, 20.0, 61);
    let cases = [
        (truncate(&twenty, 19.0), 19.0, 0),
        (twenty, 20.0, 1),
        (synth_trial(Quadrant::HAHV, 21.0, 62), 21.0, 1),
        (synth_trial(Quadrant::HALV, 60.0, 63), 60.0, 9),
        (synth_trial(Quadrant::LAHV, 600.0, 64), 600.0, 117),
    ];
    let mut counts = Vec::new();
    for (t, d, n) in &cases {
        ensure!((t.end_time() - d).abs() < 1e-9, "trial length {} for D={d}", t.end_time());
        ensure!(expected_event_count(*d, &config) == *n, "expected_event_count({d})");
        let events = replay_with(t, &config, Arc::clone(&models), Speed::Max, &ManualClock::default(), |_| {})
            .map_err(|e| e.to_string())?;
        ensure!(events.len() == *n, "D={d}: {} events, want {n}", events.len());
        for e in &events {
            let t = e.state.timestamp;
            ensure!(e.window.end == t && e.window.start == t - 20.0, "D={d}: window {:?} at {t}", e.window);
        }
        counts.push(events.len().to_string());
    }

    // Real time against unpaced, on the wall clock.
    let trial = &cases[2].0;
    let started = Instant::now();
    let paced = replay_with(trial, &config, Arc::clone(&models), Speed::Factor(1.0), &WallClock::new(), |_| {})
        .map_err(|e| e.to_string())?;
    let paced_wall = started.elapsed();
    let fast = replay_with(trial, &config, Arc::clone(&models), Speed::Max, &WallClock::new(), |_| {})
        .map_err(|e| e.to_string())?;
    ensure!(paced_wall >= Duration::from_secs_f64(20.0), "speed 1.0 replay took only {paced_wall:?}");
    ensure!(
        paced.len() == fast.len() && paced.iter().zip(&fast).all(|(a, b)| a.same_content(b)),
        "speed 1.0 and max disagree"
    );
    ensure!(log_without_latency(&paced)? == log_without_latency(&fast)?, "event logs differ");
    Ok(format!(
        "counts {} for D = 19/20/21/60/600; speed 1.0 ({:.1} s) and max logs identical excluding latency_ms",
        counts.join("/"),
        paced_wall.as_secs_f64()
    ))
}

// ---------- 8. alignment fixture ----------

fn constant_models(level: BinaryLevel) -> Result<ModelSet, String> {
    let mut set = ModelSet::new(ValenceMode::PaperLiteral);
    for kind in SignalKind::ALL {
        let names: &[&str] = match kind {
            SignalKind::Eeg => &PSD_FEATURE_NAMES,
            SignalKind::Ppg => &HRV_FEATURE_NAMES,
            SignalKind::Eda => &EDA_FEATURE_NAMES,
        };
        for dim in Dimension::ALL {
            let names = names.iter().map(|s| s.to_string()).collect();
            let m = ForestModel::from_trees(kind, dim, names, vec![Node::Leaf(level)], 0, Hyperparams::default())
                .map_err(|e| e.to_string())?;
            set.insert(m);
        }
    }
    Ok(set)
}

fn alignment_fixture() -> Check {
    // Every model votes High, so fused arousal agrees exactly on the
    // high-arousal trials: 38 of 55.
    let spec = SynthSpec {
        duration_s: 20.0,
        ..SynthSpec::strong(3, 19)
    };
    let pool = generate(&spec).map_err(|e| e.to_string())?;
    let take = |q: Quadrant, n: usize| pool.iter().filter(move |t| t.topic_category() == q).take(n).cloned();
    let trials: Vec<(TrialRecord, Split)> = take(Quadrant::HAHV, 19)
        .chain(take(Quadrant::HALV, 19))
        .chain(take(Quadrant::LAHV, 9))
        .chain(take(Quadrant::LALV, 8))
        .map(|t| (t, Split::Test))
        .collect();
    ensure!(trials.len() == 55, "fixture has {} trials", trials.len());
    let dir = workdir();
    let (ds, models, out) = (dir.join("fixture_ds"), dir.join("fixture_models"), dir.join("fixture_report.json"));
    save_dataset(&ds, &trials, None).map_err(|e| e.to_string())?;
    constant_models(BinaryLevel::High)?.save_dir(&models).map_err(|e| e.to_string())?;
    let stdout = run_ok(&["evaluate-alignment", "--dataset", &s(&ds), "--models", &s(&models), "--out", &s(&out)])?;
    let report: AlignmentReport =
        serde_json::from_str(&std::fs::read_to_string(&out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let p = report.percent(Source::Fused, Dimension::Arousal).ok_or("fused arousal not evaluated")?;
    ensure!((p - 69.1).abs() <= 0.05, "fused arousal {p}");
    ensure!(stdout.contains("69.1%"), "printed report lacks 69.1%:\n{stdout}");
    Ok(format!("fused arousal {p:.3}%"))
}

// ---------- 9. protocol ----------

fn event(q: Quadrant, t: f64) -> EmotionEvent {
    let (a, v) = quadrant_levels(q);
    EmotionEvent {
        state: EmotionState::from_levels(
            a,
            v,
            RawScores {
                arousal: a.as_f64(),
                valence: v.as_f64(),
            },
            t,
        ),
        window: Window { start: t - 20.0, end: t },
        per_modality: Vec::new(),
        latency_ms: 1.0,
    }
}

/// Eight topics with events outside and inside each utterance, plus the
/// quadrant each reply should be keyed on.
fn scripted_session(id: &str, mode: Mode) -> (Vec<Envelope>, Vec<Quadrant>) {
    let mut out = vec![Envelope::new(id, 0.0, Message::Hello { mode: Some(mode) })];
    let mut expected = Vec::new();
    let mut t = 0.0;
    for topic in 0..8usize {
        out.push(Envelope::new(id, t, Message::NextTopic));
        t += 2.0;
        out.push(Envelope::new(id, t, Message::EmotionEvent { event: event(Quadrant::LALV, t) }));
        out.push(Envelope::new(id, t, Message::SpeechStart));
        let during: Vec<Quadrant> = (0..=topic % 3).map(|k| Quadrant::ALL[(topic + 2 * k) % 4]).collect();
        let states: Vec<EmotionState> = during.iter().map(|q| event(*q, 0.0).state).collect();
        expected.push(majority_emotion(&states).unwrap());
        for q in during {
            t += 5.0;
            out.push(Envelope::new(id, t, Message::EmotionEvent { event: event(q, t) }));
        }
        t += 1.0;
        out.push(Envelope::new(id, t, Message::SpeechEnd));
        t += 1.0;
        out.push(Envelope::new(id, t, Message::EmotionEvent { event: event(Quadrant::HAHV, t) }));
    }
    out.push(Envelope::new(id, t + 1.0, Message::NextTopic));
    (out, expected)
}

fn count(replies: &[Envelope], name: &str) -> usize {
    replies.iter().filter(|e| e.message.type_name() == name).count()
}

async fn exchange(addr: std::net::SocketAddr, script: &[Envelope]) -> std::io::Result<Vec<Envelope>> {
    use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
    let stream = tokio::net::TcpStream::connect(addr).await?;
    let (read, mut write) = stream.into_split();
    let text: String = script.iter().map(|e| e.to_line() + "\n").collect();
    write.write_all(text.as_bytes()).await?;
    write.shutdown().await?;
    let mut lines = BufReader::new(read).lines();
    let mut replies = Vec::new();
    while let Some(l) = lines.next_line().await? {
        replies.push(Envelope::from_line(&l).map_err(|e| std::io::Error::other(e.to_string()))?);
    }
    Ok(replies)
}

fn protocol_suite() -> Check {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    let (emp, emp_expected, neu) = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        tokio::spawn(serve(listener, Arc::new(ServerConfig::new(Mode::Empathetic, ResponseDb::sample()))));
        let (script, expected) = scripted_session("emp", Mode::Empathetic);
        let emp = (exchange(addr, &script).await?, script);
        let (neu_script, _) = scripted_session("neu", Mode::Neutral);
        let neu = exchange(addr, &neu_script).await?;
        Ok::<_, std::io::Error>((emp, expected, neu))
    })
    .map_err(|e| e.to_string())?;

    let (replies, script) = emp;
    ensure!(count(&replies, "Error") == 0, "empathetic session produced errors");
    let events = count(&script, "EmotionEvent");
    let commands = count(&replies, "ExpressionCommand");
    ensure!(commands == events, "empathetic: {commands} ExpressionCommands for {events} events");
    let used: Vec<Option<Quadrant>> = replies
        .iter()
        .filter_map(|e| match &e.message {
            Message::ResponseUtterance { quadrant_used, .. } => Some(*quadrant_used),
            _ => None,
        })
        .collect();
    let listening = count(&script, "SpeechStart");
    ensure!(used.len() == listening, "{} utterances for {listening} listening phases", used.len());
    let want: Vec<Option<Quadrant>> = emp_expected.into_iter().map(Some).collect();
    ensure!(used == want, "quadrant_used {used:?}, want {want:?}");

    ensure!(count(&neu, "Error") == 0, "neutral session produced errors");
    ensure!(count(&neu, "ExpressionCommand") == 0, "neutral session sent ExpressionCommands");
    ensure!(count(&neu, "ResponseUtterance") == 8, "neutral utterances {}", count(&neu, "ResponseUtterance"));

    // Every message that is illegal in each phase is rejected without touching state.
    let cfg = SessionConfig {
        mode: Mode::Empathetic,
        ..SessionConfig::default()
    };
    let mut session = Session::new("ill", &cfg, Arc::new(ResponseDb::sample())).map_err(|e| e.to_string())?;
    let e = |t: f64, m: Message| Envelope::new("ill", t, m);
    let probes = [
        Message::NextTopic,
        Message::SpeechStart,
        Message::SpeechEnd,
        Message::EndSession,
        Message::EmotionEvent { event: event(Quadrant::HALV, 0.0) },
        Message::Prompt { text: "x".into() },
        Message::Hello { mode: None },
    ];
    let path = [Message::NextTopic, Message::SpeechStart, Message::SpeechEnd, Message::EndSession];
    let mut rejected = 0;
    let mut t = 1.0;
    for step in path.iter().map(Some).chain([None]) {
        let phase = session.state().phase;
        for probe in probes.iter().filter(|m| !legal(phase, m)) {
            let before = session.state().clone();
            ensure!(session.handle(&e(t, probe.clone())).is_err(), "{} accepted in {phase:?}", probe.type_name());
            ensure!(*session.state() == before, "{} mutated state in {phase:?}", probe.type_name());
            rejected += 1;
        }
        if let Some(step) = step {
            session.handle(&e(t, step.clone())).map_err(|err| format!("{}: {err}", step.type_name()))?;
            let before = session.state().clone();
            ensure!(session.handle(&e(t - 0.5, Message::EndSession)).is_err(), "stale timestamp accepted");
            ensure!(*session.state() == before, "stale timestamp mutated state");
            t += 1.0;
        }
    }
    ensure!(session.state().phase == Phase::Done, "session did not end");
    Ok(format!(
        "{commands} commands for {events} events, {} utterances keyed correctly; neutral 0 commands; {rejected} illegal messages rejected",
        used.len()
    ))
}

/// Which client messages each phase accepts.
fn legal(phase: Phase, m: &Message) -> bool {
    use Phase::*;
    match m {
        Message::NextTopic => matches!(phase, Idle | Responding),
        Message::SpeechStart => phase == Prompting,
        Message::SpeechEnd => phase == Listening,
        Message::EmotionEvent { .. } | Message::EndSession => phase != Done,
        _ => false,
    }
}

// ---------- 10. latency ----------

fn latency_budget() -> Check {
    let (config, models) = trained_models()?;
    ensure!(config.hop_seconds == 5.0 && config.window_seconds == 20.0, "not the default config");
    let trial = synth_trial(Quadrant::HALV, 600.0, 101);
    let events = replay_with(&trial, &config, models, Speed::Max, &WallClock::new(), |_| {}).map_err(|e| e.to_string())?;
    ensure!(events.len() == 117, "{} events", events.len());
    let max = events.iter().map(|e| e.latency_ms).fold(0.0, f64::max);
    let mean = events.iter().map(|e| e.latency_ms).sum::<f64>() / events.len() as f64;
    ensure!(max < 500.0, "max latency {max:.1} ms");
    Ok(format!("max {max:.1} ms, mean {mean:.1} ms over {} windows", events.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("fusion enumeration", fusion_enumeration),
        ("binarization table", binarization_table),
        ("HRV oracle equivalence", hrv_oracle_equivalence),
        ("PSD attribution", psd_attribution),
        ("EDA reconstruction", eda_reconstruction),
        ("cadence law", cadence_law),
        ("learnability end-to-end", learnability),
        ("alignment-metric fixture", alignment_fixture),
        ("orchestrator protocol suite", protocol_suite),
        ("real-time budget", latency_budget),
    ];
    report("");
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => report(&format!("PASS [{n}] {name} ({detail})")),
            Err(why) => {
                report(&format!("FAIL [{n}] {name} ({why})"));
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
