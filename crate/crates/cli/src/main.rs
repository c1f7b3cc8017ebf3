//! `affect`: synthetic data, training, replay, alignment and the orchestration server.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "affect", version, about = "Multimodal physiological emotion recognition and agent orchestration")]
struct Cli {
    /// Engine configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model directory.
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    /// Output path: dataset dir (generate), model dir (train), report file (evaluate-alignment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset of labelled trials.
    Generate(GenerateArgs),
    /// Train the per-modality arousal and valence forests.
    Train(TrainArgs),
    /// Replay one trial through the real-time engine.
    Replay(ReplayArgs),
    /// Score recognised levels against self-reports over a dataset.
    EvaluateAlignment(EvaluateArgs),
    /// Run the orchestration server.
    Serve(ServeArgs),
    /// Send a script of protocol lines to a server and print the replies.
    Client(ClientArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 40)]
    pub trials_per_quadrant: usize,
    /// Trial duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Effect-size preset.
    #[arg(long, default_value = "strong", value_parser = ["strong", "zero"])]
    pub preset: String,
    /// Full generator settings (TOML); overrides the preset and other flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Leave EEG out of every trial.
    #[arg(long)]
    pub no_eeg: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Which trials to train on: all, train or test.
    #[arg(long, default_value = "all")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Trial directory.
    #[arg(long)]
    pub trial: PathBuf,
    /// Replay speed: a positive factor of real time, or `max`.
    #[arg(long, default_value = "max")]
    pub speed: String,
    /// Write events as newline-delimited JSON.
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "all")]
    pub split: String,
    /// Score every window instead of each trial's majority.
    #[arg(long)]
    pub per_window: bool,
    /// Also classify windows directly and fail if any trial differs from the streamed result.
    #[arg(long)]
    pub check_batch: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7070")]
    pub listen: String,
    /// Mode for sessions whose Hello names none.
    #[arg(long, default_value = "empathetic")]
    pub mode: String,
    /// Response database file; the bundled sample is used otherwise.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub shuffle_topics: bool,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    #[arg(long)]
    pub connect: String,
    /// File with one protocol message per line.
    #[arg(long)]
    pub script: PathBuf,
}

/// Options shared by every command.
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub models: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let g = Globals {
        config: cli.config,
        seed: cli.seed,
        models: cli.models,
        out: cli.out,
    };
    let result: Result<(), CliError> = match cli.command {
        Command::Generate(a) => commands::generate(&g, a),
        Command::Train(a) => commands::train(&g, a),
        Command::Replay(a) => commands::replay(&g, a),
        Command::EvaluateAlignment(a) => commands::evaluate(&g, a),
        Command::Serve(a) => commands::serve(&g, a),
        Command::Client(a) => commands::client(&g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
