//! Four supervised classifiers behind one train / predict / top-k contract.
//!
//! A [`Trainer`] turns a [`Dataset`] into a boxed [`Model`]. Models rank every
//! class for an input; `predict` and `predict_topk` are prefixes of that
//! ranking, so `predict(x) == predict_topk(x, 1)[0]` holds for every kind.
//! The [`Registry`] maps classifier names to factories so callers can pick an
//! algorithm at runtime.

pub mod knn;
pub mod net;
pub mod svm;
pub mod tree;

mod normalized;
mod persist;
mod registry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use normalized::{NormalizedModel, NormalizingTrainer};
pub use persist::{load_model, read_model, save_model, write_model, ModelFile, MODEL_FORMAT, MODEL_VERSION};
pub use registry::{ClassifierFactory, Registry};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "dt")]
    DecisionTree,
    #[serde(rename = "svm")]
    Svm,
    #[serde(rename = "net")]
    AutoencoderNet,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Knn,
        ClassifierKind::DecisionTree,
        ClassifierKind::Svm,
        ClassifierKind::AutoencoderNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::DecisionTree => "dt",
            ClassifierKind::Svm => "svm",
            ClassifierKind::AutoencoderNet => "net",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown classifier `{s}` (expected knn, dt, svm or net)")))
    }
}

/// Provenance recorded with every trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub hyperparameters: Value,
    /// Wall-clock training time. Not persisted, so model files stay
    /// byte-reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

pub trait Model: Send + Sync + fmt::Debug {
    fn kind(&self) -> ClassifierKind;

    fn classes(&self) -> &[String];

    /// Feature vector length the model expects.
    fn input_len(&self) -> usize;

    /// Every class index, best first.
    fn rank(&self, x: &[f64]) -> Vec<usize>;

    /// Rankings for many inputs at once; models with batched arithmetic
    /// override this.
    fn rank_many(&self, xs: &[&[f64]]) -> Vec<Vec<usize>> {
        xs.iter().map(|x| self.rank(x)).collect()
    }

    fn predict_index(&self, x: &[f64]) -> usize {
        self.rank(x)[0]
    }

    fn meta(&self) -> &TrainingMeta;

    /// Kind-specific learned parameters for the model file.
    fn params_json(&self) -> Value;

    /// Preprocessing applied before the kind-specific model, if any.
    fn normalization(&self) -> Option<&crate::dataset::Normalization> {
        None
    }
}

/// Label-level helpers available on every model.
pub trait ModelExt: Model {
    fn predict(&self, x: &[f64]) -> &str {
        &self.classes()[self.predict_index(x)]
    }

    /// The `g` best-ranked labels (all of them when `g` exceeds the class
    /// count).
    fn predict_topk(&self, x: &[f64], g: usize) -> Vec<&str> {
        self.rank(x)
            .into_iter()
            .take(g)
            .map(|i| self.classes()[i].as_str())
            .collect()
    }
}

impl<M: Model + ?Sized> ModelExt for M {}

pub trait Trainer: Send + Sync {
    fn kind(&self) -> ClassifierKind;

    fn hyperparameters(&self) -> Value;

    fn train(&self, train: &Dataset) -> Result<Box<dyn Model>>;
}

/// Training rows as one contiguous row-major matrix.
pub(crate) fn feature_matrix(d: &Dataset) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len() * d.feature_len());
    for m in d.measurements() {
        out.extend_from_slice(&m.features);
    }
    out
}

pub(crate) fn require_non_empty(d: &Dataset) -> Result<()> {
    if d.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    Ok(())
}

/// Sorts class indices by `key` (smaller is better), ties by index.
pub(crate) fn rank_by<K: PartialOrd>(n: usize, mut key: impl FnMut(usize) -> K) -> Vec<usize> {
    let keys: Vec<K> = (0..n).map(&mut key).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .partial_cmp(&keys[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Hyperparameter lookups that name the offending key on failure.
pub(crate) struct Hyper<'a>(pub &'a Value);

impl Hyper<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key).filter(|v| !v.is_null())
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.0 {
            Value::Null => Ok(()),
            Value::Object(map) => {
                for k in map.keys() {
                    if !allowed.contains(&k.as_str()) {
                        return Err(Error::config(format!(
                            "unknown hyperparameter `{k}` (allowed: {})",
                            allowed.join(", ")
                        )));
                    }
                }
                Ok(())
            }
            other => Err(Error::config(format!("hyperparameters must be an object, got {other}"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::config(format!("hyperparameter `{key}` must be a number"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.opt_usize(key).map(|v| v.unwrap_or(default))
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|u| Some(u as usize))
                .ok_or_else(|| Error::config(format!("hyperparameter `{key}` must be a non-negative integer"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| Error::config(format!("hyperparameter `{key}` must be a non-negative integer"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_by_breaks_ties_by_index() {
        assert_eq!(rank_by(4, |i| [2.0, 1.0, 2.0, 0.5][i]), vec![3, 1, 0, 2]);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ClassifierKind::ALL {
            assert_eq!(k.name().parse::<ClassifierKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), Value::String(k.name().into()));
        }
        assert!("cnn".parse::<ClassifierKind>().is_err());
    }
}
