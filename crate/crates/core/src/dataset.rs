//! A directory of trial directories, optionally indexed with a train/test split.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TrialRecord;
use crate::synth::SynthSpec;
use crate::trial_io::{load_trial, save_trial, MANIFEST_FILE};

pub const DATASET_INDEX_FILE: &str = "dataset.json";
const DATASET_FORMAT: &str = "affect-dataset";
const DATASET_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Which trials of a dataset to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitFilter {
    #[default]
    All,
    Only(Split),
}

impl FromStr for SplitFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(SplitFilter::All),
            "train" => Ok(SplitFilter::Only(Split::Train)),
            "test" => Ok(SplitFilter::Only(Split::Test)),
            other => Err(Error::Validation(format!("split must be all, train or test, got `{other}`"))),
        }
    }
}

/// Every fourth trial of a quadrant (indices 3, 7, 11, ...) is held out.
pub fn holdout_split(index_in_quadrant: usize) -> Split {
    if index_in_quadrant % 4 == 3 {
        Split::Test
    } else {
        Split::Train
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    id: String,
    split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Index {
    format: String,
    version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synth: Option<SynthSpec>,
    trials: Vec<Entry>,
}

/// Writes every trial to `dir/<trial_id>/` plus an index recording splits.
pub fn save_dataset(dir: impl AsRef<Path>, trials: &[(TrialRecord, Split)], synth: Option<&SynthSpec>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    trials
        .par_iter()
        .try_for_each(|(t, _)| save_trial(t, dir.join(t.trial_id())))?;
    let index = Index {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        synth: synth.cloned(),
        trials: trials
            .iter()
            .map(|(t, s)| Entry {
                id: t.trial_id().to_string(),
                split: *s,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&index).map_err(|e| Error::Serialization(e.to_string()))?;
    let path = dir.join(DATASET_INDEX_FILE);
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn read_index(dir: &Path) -> Result<Option<Index>> {
    let path = dir.join(DATASET_INDEX_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: Index = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        field: "dataset index".into(),
        message: e.to_string(),
    })?;
    if index.format != DATASET_FORMAT || index.version != DATASET_VERSION {
        return Err(Error::Parse {
            path,
            line: 1,
            field: "format".into(),
            message: format!("expected {DATASET_FORMAT} version {DATASET_VERSION}"),
        });
    }
    Ok(Some(index))
}

/// Loads trials in index order. Without an index every subdirectory holding a
/// trial manifest is loaded, sorted by name, and counts as training data.
pub fn load_dataset(dir: impl AsRef<Path>, filter: SplitFilter) -> Result<Vec<TrialRecord>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let keep = |s: Split| filter == SplitFilter::All || filter == SplitFilter::Only(s);
    let ids: Vec<String> = match read_index(dir)? {
        Some(index) => index.trials.into_iter().filter(|e| keep(e.split)).map(|e| e.id).collect(),
        None => {
            let mut ids = Vec::new();
            for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let entry = entry.map_err(|e| Error::io(dir, e))?;
                if entry.path().join(MANIFEST_FILE).is_file() {
                    ids.push(entry.file_name().to_string_lossy().into_owned());
                }
            }
            ids.sort();
            if keep(Split::Train) {
                ids
            } else {
                Vec::new()
            }
        }
    };
    ids.par_iter().map(|id| load_trial(dir.join(id))).collect()
}

/// The generator settings recorded in the index, if any.
pub fn dataset_synth_spec(dir: impl AsRef<Path>) -> Result<Option<SynthSpec>> {
    Ok(read_index(dir.as_ref())?.and_then(|i| i.synth))
}
