//! k-nearest neighbours under the Euclidean metric.
//!
//! Prediction is a majority vote among the `k` closest training points
//! (distance ties go to the lower class index). Vote ties are broken by the
//! smaller mean distance of the voters, then by class index. The full ranking
//! orders classes by votes, then voter mean distance, then the distance of
//! each class's nearest member, so for `k = 1` it is exactly the
//! nearest-member ranking.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    feature_matrix, rank_by, require_non_empty, ClassifierFactory, ClassifierKind, Hyper, Model, ModelFile, Trainer,
    TrainingMeta,
};
use crate::dataset::Dataset;
use crate::encoding::EncodedMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct KnnTrainer {
    pub params: KnnParams,
}

impl KnnTrainer {
    pub fn new(k: usize) -> Self {
        KnnTrainer { params: KnnParams { k } }
    }
}

impl Trainer for KnnTrainer {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Knn
    }

    fn hyperparameters(&self) -> Value {
        json!({ "k": self.params.k })
    }

    fn train(&self, train: &Dataset) -> Result<Box<dyn Model>> {
        knn_train(train, self.params.k).map(|m| Box::new(m) as Box<dyn Model>)
    }
}

/// Stores the training set verbatim.
pub fn knn_train(train: &Dataset, k: usize) -> Result<KnnModel> {
    let start = Instant::now();
    require_non_empty(train)?;
    if k < 1 {
        return Err(Error::config("kNN needs k >= 1"));
    }
    if k > train.len() {
        return Err(Error::config(format!(
            "kNN k = {k} exceeds the {} training points",
            train.len()
        )));
    }
    Ok(KnnModel {
        classes: train.classes().to_vec(),
        k,
        dim: train.feature_len(),
        data: feature_matrix(train),
        targets: train.targets(),
        meta: TrainingMeta {
            seed: 0,
            hyperparameters: json!({ "k": k }),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    classes: Vec<String>,
    k: usize,
    dim: usize,
    data: Vec<f64>,
    targets: Vec<usize>,
    meta: TrainingMeta,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; zero-length features still have one row per point.
        (0..self.targets.len()).map(move |i| &self.data[i * self.dim..(i + 1) * self.dim])
    }
}

impl Model for KnnModel {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Knn
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn input_len(&self) -> usize {
        self.dim
    }

    fn rank(&self, x: &[f64]) -> Vec<usize> {
        assert_eq!(x.len(), self.dim, "kNN input length");
        let n_classes = self.classes.len();
        let d2: Vec<f64> = self.rows().map(|r| squared_distance(r, x)).collect();

        let mut nearest = vec![f64::INFINITY; n_classes];
        for (&d, &t) in d2.iter().zip(&self.targets) {
            nearest[t] = nearest[t].min(d);
        }

        let mut order: Vec<usize> = (0..d2.len()).collect();
        order.sort_by(|&a, &b| {
            d2[a]
                .total_cmp(&d2[b])
                .then(self.targets[a].cmp(&self.targets[b]))
                .then(a.cmp(&b))
        });
        let mut votes = vec![0usize; n_classes];
        let mut dist_sum = vec![0.0; n_classes];
        for &i in order.iter().take(self.k) {
            votes[self.targets[i]] += 1;
            dist_sum[self.targets[i]] += d2[i].sqrt();
        }
        rank_by(n_classes, |c| {
            let mean = if votes[c] > 0 {
                dist_sum[c] / votes[c] as f64
            } else {
                f64::INFINITY
            };
            (std::cmp::Reverse(votes[c]), mean, nearest[c])
        })
    }

    fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    fn params_json(&self) -> Value {
        json!({
            "k": self.k,
            "train": EncodedMatrix::new(self.targets.len(), self.dim, &self.data),
            "targets": self.targets,
        })
    }
}

#[derive(Deserialize)]
struct StoredKnn {
    k: usize,
    train: EncodedMatrix,
    targets: Vec<usize>,
}

pub struct KnnFactory;

impl ClassifierFactory for KnnFactory {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Knn
    }

    fn description(&self) -> &'static str {
        "k-nearest neighbours, Euclidean distance (k defaults to 1)"
    }

    fn trainer(&self, hyperparameters: &Value) -> Result<Box<dyn Trainer>> {
        let h = Hyper(hyperparameters);
        h.check_keys(&["k"])?;
        Ok(Box::new(KnnTrainer::new(h.usize_or("k", 1)?)))
    }

    fn decode(&self, file: &ModelFile) -> Result<Box<dyn Model>> {
        let stored: StoredKnn = file.params()?;
        let data = stored.train.decode()?;
        if stored.train.rows != stored.targets.len() || stored.train.cols != file.input_len {
            return Err(Error::data("kNN training matrix shape disagrees with the model header"));
        }
        if stored.targets.iter().any(|&t| t >= file.classes.len()) {
            return Err(Error::data("kNN target index out of range"));
        }
        if stored.k < 1 || stored.k > stored.targets.len() {
            return Err(Error::data(format!("kNN k = {} out of range", stored.k)));
        }
        Ok(Box::new(KnnModel {
            classes: file.classes.clone(),
            k: stored.k,
            dim: stored.train.cols,
            data,
            targets: stored.targets,
            meta: file.meta(),
        }))
    }
}
