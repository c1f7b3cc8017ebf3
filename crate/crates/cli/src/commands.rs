use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use affect_core::alignment::{batch_outcomes, outcome_mismatches, replay_outcomes, alignment_report, Granularity};
use affect_core::dataset::{holdout_split, load_dataset, save_dataset, SplitFilter};
use affect_core::engine::{replay_with, write_event_log, EngineConfig, Speed, WallClock};
use affect_core::model::ModelSet;
use affect_core::signal::Quadrant;
use affect_core::synth::{self, EffectSizes, SynthSpec};
use affect_core::training::train_models;
use affect_core::trial_io::load_trial;
use affect_core::{Error, ErrorKind};
use affect_orchestrator::{serve as serve_forever, Envelope, Message, Mode, OrchestratorError, ResponseDb, ServerConfig};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};

use crate::{ClientArgs, EvaluateArgs, GenerateArgs, Globals, ReplayArgs, ServeArgs, TrainArgs};

pub enum CliError {
    Core(Error),
    Orchestrator(OrchestratorError),
    /// The peer answered with protocol errors.
    Protocol(String),
    Usage(String),
}

impl CliError {
    /// 0 success, 1 validation, 2 I/O, 3 protocol.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.kind() == ErrorKind::Io => 2,
            CliError::Orchestrator(OrchestratorError::Io(_)) => 2,
            CliError::Orchestrator(OrchestratorError::Core(e)) if e.kind() == ErrorKind::Io => 2,
            CliError::Orchestrator(OrchestratorError::Protocol(_)) | CliError::Protocol(_) => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Orchestrator(e) => e.fmt(f),
            CliError::Protocol(m) => write!(f, "protocol error: {m}"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        CliError::Orchestrator(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn require_out(g: &Globals, what: &str) -> Result<PathBuf> {
    g.out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("--out is required: {what}")))
}

fn engine_config(g: &Globals) -> Result<EngineConfig> {
    match &g.config {
        Some(p) => Ok(EngineConfig::load(p)?),
        None => Ok(EngineConfig::default()),
    }
}

/// Config plus models. Without a config file the models' valence polarity is adopted.
fn config_and_models(g: &Globals) -> Result<(EngineConfig, Arc<ModelSet>)> {
    let mut config = engine_config(g)?;
    let dir = g
        .models
        .clone()
        .or_else(|| config.models.clone())
        .ok_or_else(|| CliError::Usage("--models (or `models` in the config file) is required".into()))?;
    let models = ModelSet::load_dir(&dir)?;
    if g.config.is_none() {
        config.valence_mode = models.valence_mode();
    }
    Ok((config, Arc::new(models)))
}

pub fn generate(g: &Globals, a: GenerateArgs) -> Result<()> {
    let out = require_out(g, "dataset directory")?;
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            toml::from_str::<SynthSpec>(&text).map_err(|e| CliError::Core(Error::Config(format!("{}: {e}", p.display()))))?
        }
        None => {
            let mut s = SynthSpec::strong(42, a.trials_per_quadrant);
            if a.preset == "zero" {
                s.effects = EffectSizes::ZERO;
            }
            if let Some(d) = a.duration {
                s.duration_s = d;
            }
            s.include_eeg = !a.no_eeg;
            s
        }
    };
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    let trials = synth::generate(&spec)?;
    let per_q = spec.trials_per_quadrant;
    let with_split: Vec<_> = trials
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, holdout_split(i % per_q)))
        .collect();
    save_dataset(&out, &with_split, Some(&spec))?;
    let test = with_split.iter().filter(|(_, s)| *s == affect_core::dataset::Split::Test).count();
    println!(
        "wrote {} trials ({} train, {test} test) of {} s to {}",
        with_split.len(),
        with_split.len() - test,
        spec.duration_s,
        out.display()
    );
    Ok(())
}

pub fn train(g: &Globals, a: TrainArgs) -> Result<()> {
    let out = g
        .out
        .clone()
        .or_else(|| g.models.clone())
        .ok_or_else(|| CliError::Usage("--out (or --models) is required: model directory".into()))?;
    let config = engine_config(g)?;
    let split: SplitFilter = a.split.parse()?;
    let trials = load_dataset(&a.dataset, split)?;
    let (set, summaries) = train_models(&trials, &config, g.seed.unwrap_or(42))?;
    set.save_dir(&out)?;
    let summary = serde_json::to_string_pretty(&summaries).map_err(|e| CliError::Core(Error::Serialization(e.to_string())))?;
    write_text(&out.join("training_summary.json"), &(summary + "\n"))?;
    println!("trained {} models on {} trials -> {}", set.len(), trials.len(), out.display());
    for s in &summaries {
        println!(
            "  {:<4} {:<8} examples {:>5} (high {:>5})  training accuracy {:>6.2}%",
            s.modality.as_str(),
            s.dimension.as_str(),
            s.examples,
            s.high_examples,
            s.training_accuracy
        );
    }
    Ok(())
}

pub fn replay(g: &Globals, a: ReplayArgs) -> Result<()> {
    let speed: Speed = a.speed.parse()?;
    let (config, models) = config_and_models(g)?;
    let trial = load_trial(&a.trial)?;
    let events = replay_with(&trial, &config, models, speed, &WallClock::new(), |e| {
        log::info!("t={:.1} {} {}", e.state.timestamp, e.state.quadrant, e.state.expression)
    })?;
    if let Some(path) = &a.events_out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
        write_event_log(BufWriter::new(file), &events).map_err(|e| io_err(path, e))?;
    }
    let mut hist: BTreeMap<Quadrant, usize> = Quadrant::ALL.iter().map(|q| (*q, 0)).collect();
    for e in &events {
        *hist.entry(e.state.quadrant).or_default() += 1;
    }
    let n = events.len();
    let mean = if n == 0 { 0.0 } else { events.iter().map(|e| e.latency_ms).sum::<f64>() / n as f64 };
    let max = events.iter().map(|e| e.latency_ms).fold(0.0, f64::max);
    println!("{} events", n);
    let parts: Vec<String> = hist.iter().map(|(q, c)| format!("{q}: {c}")).collect();
    println!("quadrants: {}", parts.join(", "));
    println!("latency_ms: mean {mean:.3}, max {max:.3}");
    Ok(())
}

pub fn evaluate(g: &Globals, a: EvaluateArgs) -> Result<()> {
    let (config, models) = config_and_models(g)?;
    let split: SplitFilter = a.split.parse()?;
    let trials = load_dataset(&a.dataset, split)?;
    if trials.is_empty() {
        return Err(Error::Validation(format!("no trials in {} (split {})", a.dataset.display(), a.split)).into());
    }
    let outcomes = replay_outcomes(&trials, &config, Arc::clone(&models))?;
    if a.check_batch {
        let batch = batch_outcomes(&trials, &config, &models)?;
        let bad = outcome_mismatches(&outcomes, &batch);
        if !bad.is_empty() {
            return Err(Error::Validation(format!("streamed and batch classification differ on {bad:?}")).into());
        }
        println!("streamed and batch classification agree on all {} trials", trials.len());
    }
    let granularity = if a.per_window { Granularity::Window } else { Granularity::Trial };
    let report = alignment_report(&outcomes, granularity)?;
    print!("{}", report.to_text());
    if let Some(path) = &g.out {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Core(Error::Serialization(e.to_string())))?;
        write_text(path, &(json + "\n"))?;
    }
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::Orchestrator(OrchestratorError::Io(e.to_string())))
}

pub fn serve(g: &Globals, a: ServeArgs) -> Result<()> {
    let mode: Mode = a.mode.parse()?;
    let db = match &a.responses {
        Some(p) => ResponseDb::load(p)?,
        None => ResponseDb::sample(),
    };
    let mut cfg = ServerConfig::new(mode, db);
    cfg.seed = g.seed.unwrap_or(0);
    cfg.shuffle_topics = a.shuffle_topics;
    if g.models.is_some() || g.config.as_ref().is_some() {
        match config_and_models(g) {
            Ok(pair) => cfg.engine = Some(pair),
            Err(CliError::Usage(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let with_engine = cfg.engine.is_some();
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.listen)
            .await
            .map_err(|e| OrchestratorError::Io(format!("bind {}: {e}", a.listen)))?;
        let addr = listener.local_addr().map_err(|e| OrchestratorError::Io(e.to_string()))?;
        println!("listening on {addr} (default mode {mode}, server-side recognition {})", if with_engine { "on" } else { "off" });
        serve_forever(listener, Arc::new(cfg))
            .await
            .map_err(|e| CliError::Orchestrator(OrchestratorError::Io(e.to_string())))
    })
}

pub fn client(_g: &Globals, a: ClientArgs) -> Result<()> {
    let script = fs::read_to_string(&a.script).map_err(|e| io_err(&a.script, e))?;
    let replies = runtime()?.block_on(async move {
        let stream = tokio::net::TcpStream::connect(&a.connect)
            .await
            .map_err(|e| OrchestratorError::Io(format!("connect {}: {e}", a.connect)))?;
        let (read, mut write) = stream.into_split();
        let io = |e: std::io::Error| OrchestratorError::Io(e.to_string());
        for line in script.lines().filter(|l| !l.trim().is_empty()) {
            write.write_all(line.as_bytes()).await.map_err(io)?;
            write.write_all(b"\n").await.map_err(io)?;
        }
        write.shutdown().await.map_err(io)?;
        let mut lines = BufReader::new(read).lines();
        let mut out = Vec::new();
        while let Some(l) = lines.next_line().await.map_err(io)? {
            out.push(l);
        }
        Ok::<_, OrchestratorError>(out)
    })?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let mut errors = Vec::new();
    for line in &replies {
        let _ = writeln!(w, "{line}");
        if let Ok(Envelope {
            message: Message::Error { message, .. },
            ..
        }) = Envelope::from_line(line)
        {
            errors.push(message);
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Protocol(errors.join("; ")))
    }
}
