//! Countermeasure transforms and before/after leakage comparison.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifiers::Trainer;
use crate::dataset::{downsample, split, Dataset, FeatureLayout};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Gaussian noise with standard deviation `sigma` times the per-feature
    /// training RMS.
    NoiseInjection { sigma: f64 },
    /// Block-mean downsampling by `factor`.
    SamplingDegradation { factor: usize },
    /// No event access at all: every feature vector becomes empty.
    AccessDenied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigationPolicy {
    #[serde(flatten)]
    pub kind: PolicyKind,
    #[serde(default)]
    pub seed: u64,
}

impl MitigationPolicy {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        MitigationPolicy { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PolicyKind::NoiseInjection { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                Err(Error::config(format!("noise sigma must be finite and non-negative, got {sigma}")))
            }
            PolicyKind::SamplingDegradation { factor } if factor < 2 => {
                Err(Error::config(format!("sampling degradation factor must be at least 2, got {factor}")))
            }
            _ => Ok(()),
        }
    }
}

/// Root mean square of every feature over the dataset.
pub fn feature_rms(d: &Dataset) -> Vec<f64> {
    let mut acc = vec![0.0; d.feature_len()];
    for m in d.measurements() {
        for (a, v) in acc.iter_mut().zip(&m.features) {
            *a += v * v;
        }
    }
    let n = d.len().max(1) as f64;
    acc.into_iter().map(|s| (s / n).sqrt()).collect()
}

fn inject(d: &Dataset, sigma: f64, scale: &[f64], seed: u64, stream: u64) -> Result<Dataset> {
    if sigma == 0.0 {
        return Ok(d.clone());
    }
    if scale.len() != d.feature_len() {
        return Err(Error::data("noise scale length differs from the feature length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    d.map_features(d.layout.clone(), |_, x| {
        x.iter()
            .zip(scale)
            .map(|(v, s)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (v + sigma * s * z).max(0.0)
            })
            .collect()
    })
}

fn transform(policy: &MitigationPolicy, d: &Dataset, scale: &[f64], stream: u64) -> Result<Dataset> {
    match policy.kind {
        PolicyKind::NoiseInjection { sigma } => inject(d, sigma, scale, policy.seed, stream),
        PolicyKind::SamplingDegradation { factor } => downsample(d, factor),
        PolicyKind::AccessDenied => d.map_features(FeatureLayout::empty(), |_, _| Vec::new()),
    }
}

/// Applies `policy` to one dataset, scaling injected noise by the dataset's
/// own per-feature RMS.
pub fn apply(policy: &MitigationPolicy, d: &Dataset) -> Result<Dataset> {
    policy.validate()?;
    if d.is_empty() {
        return Err(Error::data("cannot apply a mitigation to an empty dataset"));
    }
    transform(policy, d, &feature_rms(d), 0)
}

/// Applies `policy` to a train/test pair. Noise on both sides is scaled by
/// the training RMS and drawn from separate streams of the policy seed.
pub fn apply_pair(policy: &MitigationPolicy, train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    policy.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::data("cannot apply a mitigation to an empty dataset"));
    }
    let scale = feature_rms(train);
    Ok((transform(policy, train, &scale, 0)?, transform(policy, test, &scale, 1)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub policy: MitigationPolicy,
    pub split_seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub before: EvalReport,
    pub after: EvalReport,
    /// Success rate before minus after.
    pub delta: f64,
}

/// Splits `clean` once, then trains and evaluates on the clean split and
/// on the policy-transformed split.
pub fn leakage_report(
    trainer: &dyn Trainer,
    clean: &Dataset,
    policy: &MitigationPolicy,
    train_per_class: usize,
    test_per_class: usize,
    split_seed: u64,
) -> Result<LeakageReport> {
    policy.validate()?;
    let (train, test) = split(clean, train_per_class, test_per_class, split_seed)?;
    let before = evaluate(trainer.train(&train)?.as_ref(), &test, 1)?;
    let (mtrain, mtest) = apply_pair(policy, &train, &test)?;
    let after = evaluate(trainer.train(&mtrain)?.as_ref(), &mtest, 1)?;
    Ok(LeakageReport {
        policy: *policy,
        split_seed,
        train_per_class,
        test_per_class,
        delta: before.success_rate - after.success_rate,
        before,
        after,
    })
}
