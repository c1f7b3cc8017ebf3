//! Bagged CART forest for binary levels.
//!
//! Trees split on axis-aligned thresholds (`x[feature] <= threshold` goes
//! left) chosen by Gini impurity over a random subset of features at every
//! node. Each tree trains on a stratified bootstrap and owns its own RNG
//! stream, so parallel training gives the same forest as serial training.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BinaryLevel, Dimension};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::signal::SignalKind;

pub const MODEL_FORMAT: &str = "affect-forest";
pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means ceil(sqrt(d)).
    pub features_per_split: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 2,
            features_per_split: None,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 {
            return Err(Error::Config("n_trees and min_leaf must be >= 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::Config("features_per_split must be >= 1".into()));
        }
        Ok(())
    }

    fn resolve(&self, n_features: usize) -> Self {
        let k = self
            .features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features);
        Self {
            features_per_split: Some(k),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf(BinaryLevel),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> BinaryLevel {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(level) => return *level,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Leaf(_) => None,
            Node::Split { feature, left, right, .. } => {
                [Some(*feature), left.max_feature(), right.max_feature()].into_iter().flatten().max()
            }
        }
    }
}

/// Row-major training data with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub modality: SignalKind,
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<BinaryLevel>,
}

impl TrainingSet {
    pub fn from_examples(examples: &[(FeatureVector, BinaryLevel)]) -> Result<Self> {
        let (first, _) = examples
            .first()
            .ok_or_else(|| Error::Training("empty training set".into()))?;
        let names = first.names().to_vec();
        let modality = first.modality();
        let mut rows = Vec::with_capacity(examples.len());
        let mut labels = Vec::with_capacity(examples.len());
        for (i, (fv, label)) in examples.iter().enumerate() {
            if fv.names() != names.as_slice() || fv.modality() != modality {
                return Err(Error::Validation(format!(
                    "example {i} has feature names or modality that differ from example 0"
                )));
            }
            rows.push(fv.values().to_vec());
            labels.push(*label);
        }
        Ok(Self {
            modality,
            feature_names: names,
            rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    format: String,
    version: u64,
    modality: SignalKind,
    dimension: Dimension,
    feature_names: Vec<String>,
    train_seed: u64,
    hyperparams: Hyperparams,
    trees: Vec<Node>,
}

impl ForestModel {
    /// Assembles a forest from explicit trees, checking feature references.
    pub fn from_trees(
        modality: SignalKind,
        dimension: Dimension,
        feature_names: Vec<String>,
        trees: Vec<Node>,
        train_seed: u64,
        hyperparams: Hyperparams,
    ) -> Result<Self> {
        let model = Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            modality,
            dimension,
            feature_names,
            train_seed,
            hyperparams,
            trees,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Validation("forest has no trees".into()));
        }
        let d = self.feature_names.len();
        if let Some(f) = self.trees.iter().filter_map(Node::max_feature).max() {
            if f >= d {
                return Err(Error::Validation(format!(
                    "tree references feature index {f} but the model has {d} features"
                )));
            }
        }
        Ok(())
    }

    pub fn modality(&self) -> SignalKind {
        self.modality
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn trees(&self) -> &[Node] {
        &self.trees
    }

    pub fn train_seed(&self) -> u64 {
        self.train_seed
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyperparams
    }

    /// Majority vote over trees; an even split votes high.
    pub fn predict(&self, features: &FeatureVector) -> Result<BinaryLevel> {
        if features.modality() != self.modality || features.names() != self.feature_names.as_slice() {
            return Err(Error::Validation(format!(
                "{} {} model expects features {:?}, got {} features {:?}",
                self.modality,
                self.dimension,
                self.feature_names,
                features.modality(),
                features.names()
            )));
        }
        Ok(self.predict_row(features.values()))
    }

    pub fn predict_row(&self, x: &[f64]) -> BinaryLevel {
        let votes: i64 = self.trees.iter().map(|t| i64::from(t.predict(x).value())).sum();
        BinaryLevel::from_sign(votes as f64)
    }
}

/// Fits a forest on `set`. Deterministic for a given `(set, hyperparams, seed)`.
pub fn train(set: &TrainingSet, dimension: Dimension, hyperparams: Hyperparams, seed: u64) -> Result<ForestModel> {
    hyperparams.validate()?;
    if set.rows.len() != set.labels.len() {
        return Err(Error::Validation("rows and labels differ in length".into()));
    }
    let d = set.feature_names.len();
    if d == 0 {
        return Err(Error::Training("no features".into()));
    }
    if set.rows.iter().any(|r| r.len() != d) {
        return Err(Error::Validation("row width differs from feature count".into()));
    }
    let high: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == BinaryLevel::High).collect();
    let low: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == BinaryLevel::Low).collect();
    if high.len() < 2 || low.len() < 2 {
        return Err(Error::Training(format!(
            "{} {dimension}: need at least 2 examples per class, have {} high / {} low",
            set.modality,
            high.len(),
            low.len()
        )));
    }
    let hp = hyperparams.resolve(d);
    let trees: Vec<Node> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut idx = Vec::with_capacity(set.len());
            for class in [&high, &low] {
                idx.extend((0..class.len()).map(|_| class[rng.random_range(0..class.len())]));
            }
            let builder = TreeBuilder { set, hp: &hp };
            builder.grow(&mut idx, 0, &mut rng)
        })
        .collect();
    ForestModel::from_trees(set.modality, dimension, set.feature_names.clone(), trees, seed, hp)
}

struct TreeBuilder<'a> {
    set: &'a TrainingSet,
    hp: &'a Hyperparams,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn majority(pos: usize, n: usize) -> BinaryLevel {
    if 2 * pos >= n {
        BinaryLevel::High
    } else {
        BinaryLevel::Low
    }
}

impl TreeBuilder<'_> {
    fn is_high(&self, i: usize) -> bool {
        self.set.labels[i] == BinaryLevel::High
    }

    fn grow(&self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.is_high(i)).count();
        if pos == 0 || pos == n || depth >= self.hp.max_depth || n < 2 * self.hp.min_leaf {
            return Node::Leaf(majority(pos, n));
        }
        let d = self.set.feature_names.len();
        let k = self.hp.features_per_split.unwrap_or(d);

        // (weighted impurity, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for f in sample(rng, d, k).into_iter() {
            order.sort_by(|&a, &b| self.set.rows[a][f].total_cmp(&self.set.rows[b][f]));
            let mut left_pos = 0;
            for split in 1..n {
                if self.is_high(order[split - 1]) {
                    left_pos += 1;
                }
                let lo = self.set.rows[order[split - 1]][f];
                let hi = self.set.rows[order[split]][f];
                if lo == hi || split < self.hp.min_leaf || n - split < self.hp.min_leaf {
                    continue;
                }
                let score = (split as f64 * gini(left_pos, split)
                    + (n - split) as f64 * gini(pos - left_pos, n - split))
                    / n as f64;
                if best.is_none_or(|(b, _, _)| score < b) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((score, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return Node::Leaf(majority(pos, n));
        };
        let mut split_at = 0;
        for i in 0..n {
            if self.set.rows[idx[i]][feature] <= threshold {
                idx.swap(i, split_at);
                split_at += 1;
            }
        }
        let (left, right) = idx.split_at_mut(split_at);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(left, depth + 1, rng)),
            right: Box::new(self.grow(right, depth + 1, rng)),
        }
    }
}

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(model).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        field: "model".into(),
        message: e.to_string(),
    };
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    if raw.get("format").and_then(|v| v.as_str()) != Some(MODEL_FORMAT) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            field: "format".into(),
            message: format!("not an `{MODEL_FORMAT}` file"),
        });
    }
    let version = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelVersion {
            path: path.to_path_buf(),
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let model: ForestModel = serde_json::from_value(raw).map_err(parse_err)?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector::new(SignalKind::Eeg, names(values.len()), values, 0.0, 20.0).unwrap()
    }

    fn stump(threshold: f64) -> Node {
        Node::Split {
            feature: 0,
            threshold,
            left: Box::new(Node::Leaf(BinaryLevel::Low)),
            right: Box::new(Node::Leaf(BinaryLevel::High)),
        }
    }

    fn forest(trees: Vec<Node>) -> ForestModel {
        ForestModel::from_trees(SignalKind::Eeg, Dimension::Arousal, names(2), trees, 0, Hyperparams::default()).unwrap()
    }

    #[test]
    fn single_tree_semantics() {
        let m = forest(vec![stump(0.5)]);
        assert_eq!(m.predict(&fv(vec![0.2, 9.0])).unwrap(), BinaryLevel::Low);
        assert_eq!(m.predict(&fv(vec![0.5, 9.0])).unwrap(), BinaryLevel::Low);
        assert_eq!(m.predict(&fv(vec![0.7, 9.0])).unwrap(), BinaryLevel::High);
        let three = forest(vec![stump(0.5), stump(0.5), stump(0.5)]);
        for x in [0.1, 0.5, 0.9] {
            assert_eq!(three.predict(&fv(vec![x, 0.0])).unwrap(), m.predict(&fv(vec![x, 0.0])).unwrap());
        }
    }

    #[test]
    fn tie_votes_high() {
        let m = forest(vec![Node::Leaf(BinaryLevel::Low), Node::Leaf(BinaryLevel::High)]);
        assert_eq!(m.predict(&fv(vec![0.0, 0.0])).unwrap(), BinaryLevel::High);
    }

    #[test]
    fn rejects_bad_feature_index_and_names() {
        let bad = Node::Split {
            feature: 5,
            threshold: 0.0,
            left: Box::new(Node::Leaf(BinaryLevel::Low)),
            right: Box::new(Node::Leaf(BinaryLevel::High)),
        };
        assert!(ForestModel::from_trees(SignalKind::Eeg, Dimension::Arousal, names(2), vec![bad], 0, Hyperparams::default()).is_err());
        assert!(ForestModel::from_trees(SignalKind::Eeg, Dimension::Arousal, names(2), vec![], 0, Hyperparams::default()).is_err());
        let m = forest(vec![stump(0.5)]);
        assert!(m.predict(&fv(vec![0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn single_class_fails() {
        let ex: Vec<_> = (0..10).map(|i| (fv(vec![i as f64, 0.0]), BinaryLevel::High)).collect();
        let set = TrainingSet::from_examples(&ex).unwrap();
        assert!(matches!(train(&set, Dimension::Arousal, Hyperparams::default(), 1), Err(Error::Training(_))));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&forest(vec![stump(0.5)]), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap().replace("\"version\": 1", "\"version\": 7");
        fs::write(&p, text).unwrap();
        assert!(matches!(load_model(&p), Err(Error::ModelVersion { found: 7, .. })));
        fs::write(&p, "{ not json").unwrap();
        assert!(matches!(load_model(&p), Err(Error::Parse { .. })));
    }
}
