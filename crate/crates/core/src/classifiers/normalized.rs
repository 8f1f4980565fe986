use serde_json::Value;

use super::{ClassifierKind, Model, Trainer, TrainingMeta};
use crate::dataset::{Dataset, Normalization, NormalizationMode};
use crate::error::Result;

/// Fits min-max normalization on each training set it sees and wraps the
/// trained model so inputs are scaled with those parameters.
pub struct NormalizingTrainer {
    inner: Box<dyn Trainer>,
    mode: NormalizationMode,
}

impl NormalizingTrainer {
    pub fn new(inner: Box<dyn Trainer>) -> Self {
        NormalizingTrainer::with_mode(inner, NormalizationMode::PerFeature)
    }

    pub fn with_mode(inner: Box<dyn Trainer>, mode: NormalizationMode) -> Self {
        NormalizingTrainer { inner, mode }
    }
}

impl Trainer for NormalizingTrainer {
    fn kind(&self) -> ClassifierKind {
        self.inner.kind()
    }

    fn hyperparameters(&self) -> Value {
        self.inner.hyperparameters()
    }

    fn train(&self, train: &Dataset) -> Result<Box<dyn Model>> {
        let params = Normalization::fit(train, self.mode)?;
        let scaled = params.apply(train)?;
        let model = self.inner.train(&scaled)?;
        Ok(Box::new(NormalizedModel::new(params, model)))
    }
}

#[derive(Debug)]
pub struct NormalizedModel {
    params: Normalization,
    inner: Box<dyn Model>,
}

impl NormalizedModel {
    pub fn new(params: Normalization, inner: Box<dyn Model>) -> Self {
        NormalizedModel { params, inner }
    }

    pub fn inner(&self) -> &dyn Model {
        self.inner.as_ref()
    }
}

impl Model for NormalizedModel {
    fn kind(&self) -> ClassifierKind {
        self.inner.kind()
    }

    fn classes(&self) -> &[String] {
        self.inner.classes()
    }

    fn input_len(&self) -> usize {
        self.params.feature_len().unwrap_or_else(|| self.inner.input_len())
    }

    fn rank(&self, x: &[f64]) -> Vec<usize> {
        self.inner.rank(&self.params.apply_vec(x))
    }

    fn rank_many(&self, xs: &[&[f64]]) -> Vec<Vec<usize>> {
        let scaled: Vec<Vec<f64>> = xs.iter().map(|x| self.params.apply_vec(x)).collect();
        let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
        self.inner.rank_many(&refs)
    }

    fn meta(&self) -> &TrainingMeta {
        self.inner.meta()
    }

    fn params_json(&self) -> Value {
        self.inner.params_json()
    }

    fn normalization(&self) -> Option<&Normalization> {
        Some(&self.params)
    }
}
