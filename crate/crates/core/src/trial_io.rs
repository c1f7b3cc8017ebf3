//! Trial directory format.
//!
//! A trial lives in its own directory:
//!
//! ```text
//! <trial>/manifest.json   id, category, label, speech spans, per-stream metadata
//! <trial>/eeg.csv         time,<channel>,<channel>,...
//! <trial>/ppg.csv
//! <trial>/eda.csv
//! ```
//!
//! Each CSV holds every block of its stream back to back; the manifest lists
//! block start times and sample counts so gaps stay explicit. Numbers are
//! written in shortest round-trip decimal form, so a save/load cycle is
//! bit-exact. NaN and infinities are rejected in both directions.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Quadrant, SampleBlock, SelfReportLabel, SignalKind, SpeechSpan, TrialRecord};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRIAL_FORMAT: &str = "affect-trial";
pub const TRIAL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u64,
    trial_id: String,
    topic_category: Quadrant,
    label: SelfReportLabel,
    #[serde(default)]
    speech_spans: Vec<SpeechSpan>,
    streams: Vec<StreamEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StreamEntry {
    kind: SignalKind,
    file: String,
    sample_rate: f64,
    channels: Vec<String>,
    blocks: Vec<BlockEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockEntry {
    start_time: f64,
    n_samples: usize,
}

/// Reads and validates a trial directory.
pub fn load_trial(dir: impl AsRef<Path>) -> Result<TrialRecord> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        line: e.line(),
        field: "manifest".into(),
        message: e.to_string(),
    })?;
    if manifest.format != TRIAL_FORMAT {
        return Err(Error::Parse {
            path: manifest_path,
            line: 1,
            field: "format".into(),
            message: format!("expected `{TRIAL_FORMAT}`, found `{}`", manifest.format),
        });
    }
    if manifest.version != TRIAL_FORMAT_VERSION {
        return Err(Error::Parse {
            path: manifest_path,
            line: 1,
            field: "version".into(),
            message: format!("unsupported trial format version {}", manifest.version),
        });
    }

    let mut streams = BTreeMap::new();
    for entry in &manifest.streams {
        if streams.contains_key(&entry.kind) {
            return Err(Error::Validation(format!("stream {} listed twice", entry.kind)));
        }
        let blocks = read_stream(&dir.join(&entry.file), entry)?;
        streams.insert(entry.kind, blocks);
    }
    TrialRecord::new(
        manifest.trial_id,
        manifest.topic_category,
        streams,
        manifest.label,
        manifest.speech_spans,
    )
}

fn read_stream(path: &Path, entry: &StreamEntry) -> Result<Vec<SampleBlock>> {
    let parse_err = |line: usize, field: &str, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let n_ch = entry.channels.len();
    if header.len() != n_ch + 1 {
        return Err(parse_err(
            1,
            "header",
            format!("expected time + {n_ch} channel columns, found {} columns", header.len()),
        ));
    }

    let mut rows = reader.records();
    let mut blocks = Vec::with_capacity(entry.blocks.len());
    for b in &entry.blocks {
        let mut data = vec![Vec::with_capacity(b.n_samples); n_ch];
        for i in 0..b.n_samples {
            let record = match rows.next() {
                Some(r) => r.map_err(|e| csv_error(path, e))?,
                None => {
                    return Err(parse_err(0, "rows", "file ends before the manifest's sample count".into()))
                }
            };
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != n_ch + 1 {
                return Err(parse_err(line, "row", format!("expected {} fields, found {}", n_ch + 1, record.len())));
            }
            let t = parse_number(&record[0]).map_err(|m| parse_err(line, "time", m))?;
            let expected = b.start_time + i as f64 / entry.sample_rate;
            if (t - expected).abs() > 1e-6 {
                return Err(parse_err(
                    line,
                    "time",
                    format!("time {t} disagrees with manifest timing (expected {expected})"),
                ));
            }
            for (c, row) in data.iter_mut().enumerate() {
                let v = parse_number(&record[c + 1]).map_err(|m| parse_err(line, &header[c + 1], m))?;
                row.push(v);
            }
        }
        blocks.push(SampleBlock::new(
            entry.kind,
            b.start_time,
            entry.sample_rate,
            entry.channels.clone(),
            data,
        )?);
    }
    if let Some(extra) = rows.next() {
        let line = extra.ok().and_then(|r| r.position().map(|p| p.line() as usize)).unwrap_or(0);
        return Err(parse_err(line, "rows", "more rows than the manifest declares".into()));
    }
    Ok(blocks)
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{s}`"))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            field: "csv".into(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes `trial` into `dir`, creating it if needed.
pub fn save_trial(trial: &TrialRecord, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut entries = Vec::new();
    for (kind, blocks) in trial.streams() {
        let Some(first) = blocks.first() else {
            continue;
        };
        let file = format!("{}.csv", kind.file_stem());
        write_stream(&dir.join(&file), blocks)?;
        entries.push(StreamEntry {
            kind: *kind,
            file,
            sample_rate: first.sample_rate(),
            channels: first.channels().to_vec(),
            blocks: blocks
                .iter()
                .map(|b| BlockEntry {
                    start_time: b.start_time(),
                    n_samples: b.n_samples(),
                })
                .collect(),
        });
    }

    let manifest = Manifest {
        format: TRIAL_FORMAT.into(),
        version: TRIAL_FORMAT_VERSION,
        trial_id: trial.trial_id().into(),
        topic_category: trial.topic_category(),
        label: trial.label(),
        speech_spans: trial.speech_spans().to_vec(),
        streams: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn write_stream(path: &PathBuf, blocks: &[SampleBlock]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file));
    let first = &blocks[0];
    let mut header = vec!["time".to_string()];
    header.extend(first.channels().iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;

    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for block in blocks {
        for i in 0..block.n_samples() {
            fields.clear();
            fields.push(format_number(block.time_of(i))?);
            for row in block.data() {
                fields.push(format_number(row[i])?);
            }
            w.write_record(&fields).map_err(|e| csv_error(path, e))?;
        }
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

fn format_number(v: f64) -> Result<String> {
    if v.is_finite() {
        Ok(v.to_string())
    } else {
        Err(Error::Serialization(format!("non-finite value {v} cannot be written")))
    }
}
