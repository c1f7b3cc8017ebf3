use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use affect_core::engine::read_event_log;
use affect_core::features::{EDA_FEATURE_NAMES, HRV_FEATURE_NAMES};
use affect_core::model::{BinaryLevel, Dimension, ForestModel, Hyperparams, ModelSet, Node, ValenceMode};
use affect_core::signal::SignalKind;
use affect_orchestrator::{serve, Envelope, Message, Mode, ResponseDb, ServerConfig};

fn affect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affect")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// PPG and EDA models that always vote High.
fn leaf_models(dir: &Path) {
    let mut set = ModelSet::new(ValenceMode::PaperLiteral);
    for (kind, names) in [(SignalKind::Ppg, &HRV_FEATURE_NAMES[..]), (SignalKind::Eda, &EDA_FEATURE_NAMES[..])] {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        for dim in Dimension::ALL {
            let leaf = vec![Node::Leaf(BinaryLevel::High)];
            set.insert(ForestModel::from_trees(kind, dim, names.clone(), leaf, 0, Hyperparams::default()).unwrap());
        }
    }
    set.save_dir(dir).unwrap();
}

fn trial_dirs(dataset: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dataset)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(affect(&["generate", "--trials-per-quadrant", "lots"]).status.code(), Some(1));
    assert_eq!(affect(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(affect(&["replay"]).status.code(), Some(1));
    assert_eq!(affect(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let o = affect(&["replay", "--trial", p(&missing), "--models", p(&missing)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = affect(&["train", "--dataset", p(&missing), "--out", p(&dir.path().join("m"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = affect(&["generate", "--duration", "5", "--trials-per-quadrant", "1", "--out", p(&dir.path().join("d"))]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = affect(&["generate", "--seed", "1", "--trials-per-quadrant", "1", "--duration", "20", "--out", p(out)]);
        assert!(o.status.success());
        assert!(stdout(&o).contains("wrote 4 trials"), "{}", stdout(&o));
    }
    let da = trial_dirs(&a);
    assert_eq!(da.len(), 4);
    for d in &da {
        let rel = d.strip_prefix(&a).unwrap();
        for f in fs::read_dir(d).unwrap() {
            let f = f.unwrap().path();
            assert_eq!(fs::read(&f).unwrap(), fs::read(b.join(rel).join(f.file_name().unwrap())).unwrap(), "{f:?}");
        }
    }
    assert_eq!(fs::read(a.join("dataset.json")).unwrap(), fs::read(b.join("dataset.json")).unwrap());
}

#[test]
fn ten_minute_replay_emits_117_events() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, models, log) = (dir.path().join("d"), dir.path().join("m"), dir.path().join("events.ndjson"));
    let o = affect(&["generate", "--seed", "3", "--trials-per-quadrant", "1", "--duration", "600", "--no-eeg", "--out", p(&ds)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    leaf_models(&models);
    let trial = &trial_dirs(&ds)[0];
    let o = affect(&["replay", "--trial", p(trial), "--models", p(&models), "--events-out", p(&log)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("117 events"), "{out}");
    assert!(out.contains("HAHV: 117"), "{out}");
    let events = read_event_log(std::io::BufReader::new(fs::File::open(&log).unwrap())).unwrap();
    assert_eq!(events.len(), 117);
}

#[test]
fn client_exits_3_on_protocol_error() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let addr = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(serve(listener, Arc::new(ServerConfig::new(Mode::Empathetic, ResponseDb::sample()))));
        addr
    });
    let dir = tempfile::tempdir().unwrap();
    let write_script = |name: &str, msgs: Vec<Message>| {
        let path = dir.path().join(name);
        let text: String = msgs.into_iter().map(|m| Envelope::new("c", 0.0, m).to_line() + "\n").collect();
        fs::write(&path, text).unwrap();
        path
    };
    let good = write_script("good", vec![Message::Hello { mode: None }, Message::NextTopic, Message::EndSession]);
    let bad = write_script("bad", vec![Message::Hello { mode: None }, Message::SpeechEnd]);
    let addr = addr.to_string();

    let o = affect(&["client", "--connect", &addr, "--script", p(&good)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("StartTopic"));
    let o = affect(&["client", "--connect", &addr, "--script", p(&bad)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    drop(rt);
}
