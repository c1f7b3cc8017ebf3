//! The six per-modality, per-dimension forests as one directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_model, save_model, Dimension, ForestModel, ModalityPrediction, ValenceMode};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::signal::SignalKind;

pub const MODEL_INDEX_FILE: &str = "models.json";
const INDEX_FORMAT: &str = "affect-models";
const INDEX_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    modality: SignalKind,
    dimension: Dimension,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Index {
    format: String,
    version: u64,
    valence_mode: ValenceMode,
    models: Vec<IndexEntry>,
}

pub fn model_file_name(modality: SignalKind, dimension: Dimension) -> String {
    format!("{}_{}.json", modality.file_stem(), dimension)
}

/// Forests keyed by modality and dimension, plus the valence polarity they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    valence_mode: ValenceMode,
    models: BTreeMap<(SignalKind, Dimension), ForestModel>,
}

impl ModelSet {
    pub fn new(valence_mode: ValenceMode) -> Self {
        Self {
            valence_mode,
            models: BTreeMap::new(),
        }
    }

    pub fn valence_mode(&self) -> ValenceMode {
        self.valence_mode
    }

    pub fn insert(&mut self, model: ForestModel) {
        self.models.insert((model.modality(), model.dimension()), model);
    }

    pub fn get(&self, modality: SignalKind, dimension: Dimension) -> Option<&ForestModel> {
        self.models.get(&(modality, dimension))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ForestModel> {
        self.models.values()
    }

    /// Modalities with both an arousal and a valence model.
    pub fn modalities(&self) -> Vec<SignalKind> {
        SignalKind::ALL
            .into_iter()
            .filter(|k| Dimension::ALL.iter().all(|d| self.models.contains_key(&(*k, *d))))
            .collect()
    }

    /// Both levels for the vector's modality, or `None` when that modality has no models.
    pub fn predict(&self, features: &FeatureVector) -> Result<Option<ModalityPrediction>> {
        let modality = features.modality();
        match (self.get(modality, Dimension::Arousal), self.get(modality, Dimension::Valence)) {
            (Some(a), Some(v)) => Ok(Some(ModalityPrediction {
                modality,
                arousal: a.predict(features)?,
                valence: v.predict(features)?,
            })),
            _ => Ok(None),
        }
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::new();
        for model in self.models.values() {
            let file = model_file_name(model.modality(), model.dimension());
            save_model(model, dir.join(&file))?;
            entries.push(IndexEntry {
                modality: model.modality(),
                dimension: model.dimension(),
                file,
            });
        }
        let index = Index {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            valence_mode: self.valence_mode,
            models: entries,
        };
        let text = serde_json::to_string_pretty(&index).map_err(|e| Error::Serialization(e.to_string()))?;
        let path = dir.join(MODEL_INDEX_FILE);
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Loads every model listed in the directory index. A listed file that is
    /// missing is an error naming that model.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MODEL_INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let index: Index = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            field: "index".into(),
            message: e.to_string(),
        })?;
        if index.format != INDEX_FORMAT {
            return Err(Error::Parse {
                path,
                line: 1,
                field: "format".into(),
                message: format!("not an `{INDEX_FORMAT}` index"),
            });
        }
        if index.version != INDEX_VERSION {
            return Err(Error::ModelVersion {
                path,
                found: index.version,
                expected: INDEX_VERSION,
            });
        }
        let mut set = ModelSet::new(index.valence_mode);
        for entry in index.models {
            let file = dir.join(&entry.file);
            if !file.is_file() {
                return Err(Error::io(
                    &file,
                    std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("{} {} model file is missing", entry.modality, entry.dimension),
                    ),
                ));
            }
            let model = load_model(&file)?;
            if (model.modality(), model.dimension()) != (entry.modality, entry.dimension) {
                return Err(Error::Validation(format!(
                    "{} holds a {} {} model, index says {} {}",
                    file.display(),
                    model.modality(),
                    model.dimension(),
                    entry.modality,
                    entry.dimension
                )));
            }
            set.insert(model);
        }
        if set.is_empty() {
            return Err(Error::Validation(format!("{} lists no models", path.display())));
        }
        Ok(set)
    }
}
