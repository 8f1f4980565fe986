//! Labeled feature vectors built from raw traces, plus the split, fold and
//! preprocessing machinery every evaluation protocol uses.

mod io;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use io::{load, read_from, save, write_to};

use crate::collector::RawTraceSet;
use crate::error::{Error, Result};
use crate::event::EventName;

/// How a feature vector maps back onto events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub events: Vec<EventName>,
    /// Samples per event before any downsampling.
    pub samples_per_event: Vec<usize>,
    /// Cumulative downsampling factor applied to the concatenated vector.
    pub downsample: usize,
}

impl FeatureLayout {
    pub fn new(events: Vec<EventName>, samples_per_event: Vec<usize>) -> Self {
        FeatureLayout {
            events,
            samples_per_event,
            downsample: 1,
        }
    }

    pub fn uniform(events: Vec<EventName>, samples: usize) -> Self {
        let n = events.len();
        FeatureLayout::new(events, vec![samples; n])
    }

    pub fn empty() -> Self {
        FeatureLayout::new(Vec::new(), Vec::new())
    }

    pub fn feature_len(&self) -> usize {
        let raw: usize = self.samples_per_event.iter().sum();
        raw.div_ceil(self.downsample.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMeta {
    pub scenario: String,
    pub captured_at_ms: u64,
    /// Concatenation order of the per-event series.
    pub events: Vec<EventName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    pub features: Vec<f64>,
    pub meta: MeasurementMeta,
}

/// Truncates or zero-pads every event series to the configured sample count
/// and concatenates them in configuration order.
pub fn concatenate(raw: &RawTraceSet, label: &str, captured_at_ms: u64, scenario: &str) -> Result<Measurement> {
    raw.validate()?;
    let expected = raw.config.expected_samples();
    let mut features = Vec::with_capacity(expected * raw.series.len());
    for s in &raw.series {
        features.extend(s.iter().take(expected).map(|&v| v as f64));
        features.extend(std::iter::repeat_n(0.0, expected.saturating_sub(s.len())));
    }
    Ok(Measurement {
        label: label.to_string(),
        features,
        meta: MeasurementMeta {
            scenario: scenario.to_string(),
            captured_at_ms,
            events: raw.events(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Min-max per feature column, fitted on the training set.
    #[default]
    PerFeature,
    /// Min-max within each measurement; nothing to fit.
    PerMeasurement,
}

/// Fitted min-max parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mode: NormalizationMode,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

fn min_max_scale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl Normalization {
    pub fn fit(train: &Dataset, mode: NormalizationMode) -> Result<Normalization> {
        if train.is_empty() {
            return Err(Error::data("cannot fit normalization on an empty dataset"));
        }
        if mode == NormalizationMode::PerMeasurement {
            return Ok(Normalization {
                mode,
                min: Vec::new(),
                max: Vec::new(),
            });
        }
        let len = train.feature_len();
        let mut min = vec![f64::INFINITY; len];
        let mut max = vec![f64::NEG_INFINITY; len];
        for m in &train.measurements {
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(&m.features) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        Ok(Normalization { mode, min, max })
    }

    /// Number of features the parameters were fitted on; `None` for the
    /// per-measurement mode.
    pub fn feature_len(&self) -> Option<usize> {
        match self.mode {
            NormalizationMode::PerFeature => Some(self.min.len()),
            NormalizationMode::PerMeasurement => None,
        }
    }

    /// Values outside the fitted range map outside [0, 1]; nothing is clamped.
    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        match self.mode {
            NormalizationMode::PerFeature => {
                debug_assert_eq!(x.len(), self.min.len());
                x.iter()
                    .zip(self.min.iter().zip(&self.max))
                    .map(|(&v, (&lo, &hi))| min_max_scale(v, lo, hi))
                    .collect()
            }
            NormalizationMode::PerMeasurement => {
                let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                x.iter().map(|&v| min_max_scale(v, lo, hi)).collect()
            }
        }
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if let Some(len) = self.feature_len() {
            if len != d.feature_len() {
                return Err(Error::data(format!(
                    "normalization fitted on {len} features, dataset has {}",
                    d.feature_len()
                )));
            }
        }
        let mut out = d.clone();
        for m in &mut out.measurements {
            m.features = self.apply_vec(&m.features);
        }
        out.normalization = Some(self.clone());
        Ok(out)
    }
}

/// Labeled measurements sharing one feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenario: String,
    pub layout: FeatureLayout,
    classes: Vec<String>,
    measurements: Vec<Measurement>,
    /// Parameters that produced the current features, if normalized.
    pub normalization: Option<Normalization>,
}

impl Dataset {
    /// Classes are ordered by first appearance.
    pub fn new(scenario: impl Into<String>, layout: FeatureLayout, measurements: Vec<Measurement>) -> Result<Self> {
        let mut classes: Vec<String> = Vec::new();
        for m in &measurements {
            if !classes.contains(&m.label) {
                classes.push(m.label.clone());
            }
        }
        Dataset::with_classes(scenario, layout, classes, measurements)
    }

    /// Uses an explicit class order; every label must be in `classes`.
    pub fn with_classes(
        scenario: impl Into<String>,
        layout: FeatureLayout,
        classes: Vec<String>,
        measurements: Vec<Measurement>,
    ) -> Result<Self> {
        let d = Dataset {
            scenario: scenario.into(),
            layout,
            classes,
            measurements,
            normalization: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(Error::data(format!("class `{c}` listed twice")));
            }
        }
        let len = self.layout.feature_len();
        if self.layout.events.len() != self.layout.samples_per_event.len() {
            return Err(Error::data("layout lists a different number of events and lengths"));
        }
        for (i, m) in self.measurements.iter().enumerate() {
            if !self.classes.contains(&m.label) {
                return Err(Error::data(format!("measurement {i} has unknown label `{}`", m.label)));
            }
            if m.features.len() != len {
                return Err(Error::data(format!(
                    "measurement {i} has {} features, layout implies {len}",
                    m.features.len()
                )));
            }
            if m.meta.events != self.layout.events {
                return Err(Error::data(format!("measurement {i} has a different event order")));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn into_measurements(self) -> Vec<Measurement> {
        self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.layout.feature_len()
    }

    pub fn push(&mut self, m: Measurement) -> Result<()> {
        if m.features.len() != self.feature_len() {
            return Err(Error::data(format!(
                "measurement has {} features, dataset has {}",
                m.features.len(),
                self.feature_len()
            )));
        }
        if m.meta.events != self.layout.events {
            return Err(Error::data("measurement event order differs from the dataset"));
        }
        if !self.classes.contains(&m.label) {
            self.classes.push(m.label.clone());
        }
        self.measurements.push(m);
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Class index of every measurement.
    pub fn targets(&self) -> Vec<usize> {
        let lookup: HashMap<&str, usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        self.measurements.iter().map(|m| lookup[m.label.as_str()]).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for t in self.targets() {
            counts[t] += 1;
        }
        counts
    }

    /// Same layout and classes, chosen measurements.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            scenario: self.scenario.clone(),
            layout: self.layout.clone(),
            classes: self.classes.clone(),
            measurements: indices.iter().map(|&i| self.measurements[i].clone()).collect(),
            normalization: self.normalization.clone(),
        }
    }

    /// Replaces every feature vector through `f`, keeping labels and meta.
    pub fn map_features(&self, layout: FeatureLayout, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Result<Dataset> {
        let measurements = self
            .measurements
            .iter()
            .enumerate()
            .map(|(i, m)| Measurement {
                label: m.label.clone(),
                features: f(i, &m.features),
                meta: MeasurementMeta {
                    events: layout.events.clone(),
                    ..m.meta.clone()
                },
            })
            .collect();
        let d = Dataset {
            scenario: self.scenario.clone(),
            layout,
            classes: self.classes.clone(),
            measurements,
            normalization: None,
        };
        d.validate()?;
        Ok(d)
    }

    /// Per-class measurement indices in dataset order.
    fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.classes.len()];
        for (i, t) in self.targets().into_iter().enumerate() {
            by_class[t].push(i);
        }
        by_class
    }

    /// Per-class indices, each list shuffled by a seeded generator.
    fn shuffled_by_class(&self, seed: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class = self.indices_by_class();
        for idx in &mut by_class {
            idx.shuffle(&mut rng);
        }
        by_class
    }

    /// SHA-256 of the serialized dataset file.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        write_to(self, &mut bytes).expect("writing to memory cannot fail");
        crate::encoding::sha256_hex(&bytes)
    }
}

/// Fits per-feature min-max parameters on `train` and returns the scaled
/// training set with the parameters stored on it.
pub fn normalize_fit(train: &Dataset) -> Result<Dataset> {
    normalize_fit_mode(train, NormalizationMode::PerFeature)
}

pub fn normalize_fit_mode(train: &Dataset, mode: NormalizationMode) -> Result<Dataset> {
    Normalization::fit(train, mode)?.apply(train)
}

/// Scales `other` with parameters fitted elsewhere.
pub fn normalize_apply(params: &Normalization, other: &Dataset) -> Result<Dataset> {
    params.apply(other)
}

/// Block means over consecutive runs of `factor` features; a trailing partial
/// block is averaged over its own size.
pub fn downsample_vec(x: &[f64], factor: usize) -> Vec<f64> {
    x.chunks(factor.max(1))
        .map(|block| block.iter().sum::<f64>() / block.len() as f64)
        .collect()
}

/// Stored normalization parameters are dropped: they no longer match the
/// feature length.
pub fn downsample(d: &Dataset, factor: usize) -> Result<Dataset> {
    if factor < 1 {
        return Err(Error::config("downsampling factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(d.clone());
    }
    let mut layout = d.layout.clone();
    layout.downsample *= factor;
    d.map_features(layout, |_, x| downsample_vec(x, factor))
}

/// Per-class sampling without replacement: `n_train` and `n_test`
/// measurements of every class.
pub fn split(d: &Dataset, n_train: usize, n_test: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let by_class = d.shuffled_by_class(seed);
    let mut train = Vec::with_capacity(n_train * by_class.len());
    let mut test = Vec::with_capacity(n_test * by_class.len());
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < n_train + n_test {
            return Err(Error::data(format!(
                "class `{}` has {} measurements, {} requested ({n_train} train + {n_test} test)",
                d.classes[c],
                idx.len(),
                n_train + n_test
            )));
        }
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..n_train + n_test]);
    }
    Ok((d.subset(&train), d.subset(&test)))
}

/// Stratified folds: the i-th shuffled member of each class goes to fold
/// `i % k`. Returns `(train, validation)` per fold.
pub fn kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    if k < 2 {
        return Err(Error::config(format!("k-fold needs k >= 2, got {k}")));
    }
    let by_class = d.shuffled_by_class(seed);
    let mut fold_of = vec![0usize; d.len()];
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::data(format!(
                "class `{}` has {} measurements, fewer than {k} folds",
                d.classes[c],
                idx.len()
            )));
        }
        for (i, &m) in idx.iter().enumerate() {
            fold_of[m] = i % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| fold_of[i] == f);
            (d.subset(&train), d.subset(&val))
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    pub fn dataset(rows: &[(&str, Vec<f64>)]) -> Dataset {
        let len = rows.first().map_or(0, |r| r.1.len());
        let layout = FeatureLayout::uniform(vec![EventName::Instructions], len);
        let ms = rows
            .iter()
            .map(|(label, f)| Measurement {
                label: label.to_string(),
                features: f.clone(),
                meta: MeasurementMeta {
                    scenario: "test".into(),
                    captured_at_ms: 0,
                    events: vec![EventName::Instructions],
                },
            })
            .collect();
        Dataset::new("test", layout, ms).unwrap()
    }

    /// `per_class` measurements for each of `classes` classes with distinct
    /// single features.
    pub fn balanced(classes: usize, per_class: usize) -> Dataset {
        let rows: Vec<(String, Vec<f64>)> = (0..classes * per_class)
            .map(|i| (format!("c{}", i % classes), vec![i as f64]))
            .collect();
        let refs: Vec<(&str, Vec<f64>)> = rows.iter().map(|(l, f)| (l.as_str(), f.clone())).collect();
        dataset(&refs)
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use crate::event::{preset_for, ProfilingScope, ScenarioName};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn raw_for(name: ScenarioName, len: usize) -> RawTraceSet {
        let mut config = preset_for(name).config;
        config.scope = config.scope.with_pid(1);
        let n = config.events.len();
        RawTraceSet {
            config,
            series: (0..n).map(|e| (0..len as u64).map(|v| v + e as u64).collect()).collect(),
            timestamps_ns: (0..len as u64).collect(),
        }
    }

    #[test]
    fn concatenated_lengths_match_presets() {
        let arm = concatenate(&raw_for(ScenarioName::ChromeArm, 25_001), "a", 0, "chrome-arm").unwrap();
        assert_eq!(arm.features.len(), 150_000);
        let tor = concatenate(&raw_for(ScenarioName::TorIntel, 49_999), "a", 0, "tor-intel").unwrap();
        assert_eq!(tor.features.len(), 150_000);
        assert_eq!(tor.features[49_999], 0.0);
        assert_eq!(tor.meta.events, preset_for(ScenarioName::TorIntel).config.event_names());
    }

    #[test]
    fn concatenate_pads_with_zeros() {
        let mut config = preset_for(ScenarioName::TorIntel).config;
        config.events.truncate(1);
        config.scope = ProfilingScope::CoreWide { cpu: 0 };
        config.duration_s = 0.0008;
        config.read_interval_us = 200;
        let raw = RawTraceSet {
            config,
            series: vec![vec![5, 7]],
            timestamps_ns: vec![1, 2],
        };
        let m = concatenate(&raw, "x", 0, "s").unwrap();
        assert_eq!(m.features, vec![5.0, 7.0, 0.0, 0.0]);
    }

    #[test]
    fn min_max_rules() {
        let d = dataset(&[("a", vec![0.0, 7.0]), ("b", vec![5.0, 7.0]), ("a", vec![10.0, 7.0])]);
        let n = normalize_fit(&d).unwrap();
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|j| n.measurements().iter().map(|m| m.features[j]).collect())
            .collect();
        assert_eq!(cols[0], vec![0.0, 0.5, 1.0]);
        assert_eq!(cols[1], vec![0.0, 0.0, 0.0]);

        let params = n.normalization.clone().unwrap();
        let t = dataset(&[("a", vec![12.0, 3.0])]);
        let scaled = normalize_apply(&params, &t).unwrap();
        assert!((scaled.measurements()[0].features[0] - (12.0 - 0.0) / (10.0 - 0.0)).abs() < 1e-15);
        assert_eq!(scaled.measurements()[0].features[0], 1.2);

        let wrong = dataset(&[("a", vec![1.0])]);
        assert!(normalize_apply(&params, &wrong).is_err());
    }

    #[test]
    fn per_measurement_mode() {
        let d = dataset(&[("a", vec![2.0, 4.0, 6.0])]);
        let n = normalize_fit_mode(&d, NormalizationMode::PerMeasurement).unwrap();
        assert_eq!(n.measurements()[0].features, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn downsample_examples() {
        assert_eq!(downsample_vec(&[2.0, 4.0, 6.0, 8.0], 2), vec![3.0, 7.0]);
        assert_eq!(downsample_vec(&[1.0, 2.0, 3.0], 2), vec![1.5, 3.0]);
        assert_eq!(downsample_vec(&[1.0, 2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
        let d = dataset(&[("a", vec![1.0, 2.0, 3.0])]);
        assert!(downsample(&d, 0).is_err());
        let half = downsample(&d, 2).unwrap();
        assert_eq!(half.feature_len(), 2);
        assert_eq!(half.layout.downsample, 2);
    }

    #[test]
    fn split_protocol() {
        let d = balanced(3, 50);
        let (train, test) = split(&d, 40, 10, 7).unwrap();
        assert_eq!(train.len(), 120);
        assert_eq!(test.len(), 30);
        assert_eq!(train.class_counts(), vec![40; 3]);
        assert_eq!(test.class_counts(), vec![10; 3]);
        let a: HashSet<u64> = train.measurements().iter().map(|m| m.features[0] as u64).collect();
        let b: HashSet<u64> = test.measurements().iter().map(|m| m.features[0] as u64).collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(split(&d, 40, 10, 7).unwrap(), (train, test));
    }

    #[test]
    fn split_insufficient_names_class() {
        let d = balanced(2, 20);
        let msg = split(&d, 40, 10, 1).unwrap_err().to_string();
        assert!(msg.contains("class `c0`"), "{msg}");
    }

    #[test]
    fn kfold_protocol() {
        let d = balanced(3, 20);
        let folds = kfold(&d, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = Vec::new();
        for (train, val) in &folds {
            assert_eq!(val.class_counts(), vec![2; 3]);
            assert_eq!(train.len() + val.len(), d.len());
            seen.extend(val.measurements().iter().map(|m| m.features[0] as u64));
        }
        seen.sort();
        assert_eq!(seen, (0..60).collect::<Vec<_>>());

        let loo = kfold(&d, 20, 3).unwrap();
        assert!(loo.iter().all(|(_, v)| v.class_counts() == vec![1; 3]));
        assert!(kfold(&d, 1, 3).is_err());
        assert!(kfold(&d, 21, 3).is_err());
    }

    proptest! {
        #[test]
        fn normalized_train_in_unit_interval(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 4), 1..20)) {
            let refs: Vec<(&str, Vec<f64>)> = rows.iter().map(|r| ("a", r.clone())).collect();
            let n = normalize_fit(&dataset(&refs)).unwrap();
            for m in n.measurements() {
                prop_assert!(m.features.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
            // Refitting on normalized data is the identity.
            let again = normalize_fit(&n).unwrap();
            for (a, b) in again.measurements().iter().zip(n.measurements()) {
                for (x, y) in a.features.iter().zip(&b.features) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn downsample_composes(blocks in 1usize..20, a in 1usize..5, b in 1usize..5, seed in 0u64..1000) {
            let len = blocks * a * b;
            let x: Vec<f64> = (0..len).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64).collect();
            let two = downsample_vec(&downsample_vec(&x, a), b);
            let one = downsample_vec(&x, a * b);
            prop_assert_eq!(two.len(), one.len());
            for (p, q) in two.iter().zip(&one) {
                prop_assert!((p - q).abs() <= 1e-9 * q.abs().max(1.0));
            }
        }

        #[test]
        fn nested_ceil_lengths(len in 0usize..500, a in 1usize..7, b in 1usize..7) {
            let x = vec![1.0; len];
            let mut layout = FeatureLayout::uniform(vec![EventName::Instructions], len);
            layout.downsample = a * b;
            prop_assert_eq!(downsample_vec(&downsample_vec(&x, a), b).len(), layout.feature_len());
        }
    }
}
