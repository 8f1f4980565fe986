//! Seeded synthetic traces standing in for real website loads.
//!
//! Each class gets one waveform per event: a random step function (load
//! phases) plus Gaussian bumps (bursts). Measurements are noisy copies of the
//! class waveforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureLayout, Measurement, MeasurementMeta};
use crate::error::{Error, Result};
use crate::event::EventName;
use crate::labels::class_label;

pub const SCENARIO: &str = "synthetic";

/// Event order used for synthetic layouts, the Intel preset events first.
pub const SYNTH_EVENTS: [EventName; 7] = [
    EventName::BranchInstructions,
    EventName::CacheReferences,
    EventName::LlcLoads,
    EventName::Instructions,
    EventName::BusCycles,
    EventName::L1dLoads,
    EventName::L1iLoads,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub label: String,
    pub events: Vec<EventName>,
    /// One base waveform per event.
    pub waveforms: Vec<Vec<f64>>,
}

impl ClassProfile {
    pub fn concatenated(&self) -> Vec<f64> {
        self.waveforms.concat()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Gaussian noise standard deviation as a fraction of each event
    /// waveform's RMS.
    pub additive_sigma: f64,
    /// Circular shift bound as a fraction of the per-event length.
    pub max_shift: f64,
    /// Amplitude factor drawn from `[1 - j, 1 + j]`.
    pub amplitude_jitter: f64,
    /// Mean of Poisson background counts added to every sample.
    pub background_floor: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel::default()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("additive_sigma", self.additive_sigma),
            ("max_shift", self.max_shift),
            ("amplitude_jitter", self.amplitude_jitter),
            ("background_floor", self.background_floor),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("noise {name} must be finite and non-negative, got {v}")));
            }
        }
        if self.max_shift >= 0.5 {
            return Err(Error::config(format!("noise max_shift must be below 0.5, got {}", self.max_shift)));
        }
        if self.amplitude_jitter > 1.0 {
            return Err(Error::config(format!(
                "noise amplitude_jitter must be at most 1, got {}",
                self.amplitude_jitter
            )));
        }
        Ok(())
    }
}

/// Per-event magnitudes, so events differ by orders of magnitude like real
/// counters do.
fn event_scale(e: usize) -> f64 {
    10f64.powi(2 + (e % 3) as i32)
}

fn waveform(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    let phases = rng.random_range(3..=8usize);
    let mut cuts: Vec<usize> = (0..phases - 1).map(|_| rng.random_range(0..len)).collect();
    cuts.sort_unstable();
    let levels: Vec<f64> = (0..phases).map(|_| rng.random_range(0.2..=1.0) * scale).collect();
    let mut w: Vec<f64> = (0..len)
        .map(|t| levels[cuts.iter().take_while(|&&c| c <= t).count()])
        .collect();
    let bumps = rng.random_range(2..=6usize);
    let n = len as f64;
    for _ in 0..bumps {
        let center = rng.random_range(0.0..n);
        let width = rng.random_range(0.01..=0.05) * n;
        let height = rng.random_range(0.2..=1.0) * scale;
        for (t, v) in w.iter_mut().enumerate() {
            let z = (t as f64 - center) / width;
            *v += height * (-0.5 * z * z).exp();
        }
    }
    w
}

/// One profile per class. Class `c` draws from its own generator stream, so
/// a profile depends only on `(seed, c)` and the shape arguments.
pub fn gen_profiles(
    n_classes: usize,
    n_events: usize,
    samples_per_event: usize,
    seed: u64,
) -> Result<Vec<ClassProfile>> {
    if n_classes == 0 || samples_per_event == 0 {
        return Err(Error::config("synthetic profiles need at least one class and one sample"));
    }
    if n_events == 0 || n_events > SYNTH_EVENTS.len() {
        return Err(Error::config(format!(
            "synthetic profiles support 1 to {} events, got {n_events}",
            SYNTH_EVENTS.len()
        )));
    }
    let events = SYNTH_EVENTS[..n_events].to_vec();
    Ok((0..n_classes)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            ClassProfile {
                label: class_label(c),
                events: events.clone(),
                waveforms: (0..n_events)
                    .map(|e| waveform(&mut rng, samples_per_event, event_scale(e)))
                    .collect(),
            }
        })
        .collect())
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// `n_per_class` noisy measurements per profile, grouped by class.
pub fn gen_dataset(profiles: &[ClassProfile], n_per_class: usize, noise: &NoiseModel, seed: u64) -> Result<Dataset> {
    noise.validate()?;
    if n_per_class == 0 {
        return Err(Error::config("synthetic dataset needs at least one measurement per class"));
    }
    let first = profiles
        .first()
        .ok_or_else(|| Error::config("no class profiles to sample from"))?;
    let len = first.waveforms.first().map_or(0, Vec::len);
    for p in profiles {
        if p.events != first.events || p.waveforms.len() != p.events.len() || p.waveforms.iter().any(|w| w.len() != len) {
            return Err(Error::config(format!("profile `{}` does not match the first profile's shape", p.label)));
        }
    }
    let layout = FeatureLayout::uniform(first.events.clone(), len);
    let bound = (noise.max_shift * len as f64).floor() as i64;
    let background = if noise.background_floor > 0.0 {
        Some(Poisson::new(noise.background_floor).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };

    let mut measurements = Vec::with_capacity(profiles.len() * n_per_class);
    for (c, p) in profiles.iter().enumerate() {
        let sigmas: Vec<f64> = p.waveforms.iter().map(|w| noise.additive_sigma * rms(w)).collect();
        for m in 0..n_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((c * n_per_class + m) as u64);
            let shift = if bound > 0 { rng.random_range(-bound..=bound) } else { 0 };
            let amp = if noise.amplitude_jitter > 0.0 {
                rng.random_range(1.0 - noise.amplitude_jitter..=1.0 + noise.amplitude_jitter)
            } else {
                1.0
            };
            let mut features = Vec::with_capacity(len * p.waveforms.len());
            for (w, &sigma) in p.waveforms.iter().zip(&sigmas) {
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
                for t in 0..len {
                    let src = (t as i64 - shift).rem_euclid(len as i64) as usize;
                    let mut v = amp * w[src];
                    if sigma > 0.0 {
                        v += normal.sample(&mut rng);
                    }
                    if let Some(bg) = &background {
                        v += bg.sample(&mut rng);
                    }
                    features.push(v.max(0.0));
                }
            }
            measurements.push(Measurement {
                label: p.label.clone(),
                features,
                meta: MeasurementMeta {
                    scenario: SCENARIO.into(),
                    captured_at_ms: 0,
                    events: first.events.clone(),
                },
            });
        }
    }
    let classes = profiles.iter().map(|p| p.label.clone()).collect();
    Dataset::with_classes(SCENARIO, layout, classes, measurements)
}

/// Realized circular shift of measurement `m` of class `c`, as drawn by
/// [`gen_dataset`].
pub fn realized_shift(noise: &NoiseModel, samples_per_event: usize, n_per_class: usize, c: usize, m: usize, seed: u64) -> i64 {
    let bound = (noise.max_shift * samples_per_event as f64).floor() as i64;
    if bound == 0 {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((c * n_per_class + m) as u64);
    rng.random_range(-bound..=bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::knn::knn_train;
    use crate::classifiers::ModelExt;
    use proptest::prelude::*;

    #[test]
    fn profile_shapes() {
        let p = gen_profiles(30, 3, 10_000, 7).unwrap();
        assert_eq!(p.len(), 30);
        assert!(p.iter().all(|c| c.concatenated().len() == 30_000));
        assert_eq!(p[0].label, "Netflix.com");
        assert_eq!(p[0].events, SYNTH_EVENTS[..3].to_vec());
    }

    #[test]
    fn profiles_are_seeded_and_distinct() {
        let a = gen_profiles(8, 2, 500, 1).unwrap();
        assert_eq!(a, gen_profiles(8, 2, 500, 1).unwrap());
        assert_ne!(a, gen_profiles(8, 2, 500, 2).unwrap());
        // Class c does not depend on how many classes were requested.
        assert_eq!(a[3], gen_profiles(4, 2, 500, 1).unwrap()[3]);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let d: f64 = a[i]
                    .concatenated()
                    .iter()
                    .zip(a[j].concatenated())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                assert!(d > 0.0);
            }
        }
        assert!(a.iter().flat_map(|p| p.concatenated()).all(|v| v >= 0.0));
    }

    #[test]
    fn zero_noise_reproduces_profiles() {
        let p = gen_profiles(3, 2, 100, 4).unwrap();
        let d = gen_dataset(&p, 2, &NoiseModel::none(), 9).unwrap();
        assert_eq!(d.len(), 6);
        for m in d.measurements() {
            let c = d.class_index(&m.label).unwrap();
            assert_eq!(m.features, p[c].concatenated());
        }
    }

    #[test]
    fn additive_noise_matches_requested_scale() {
        let p = gen_profiles(2, 3, 2000, 4).unwrap();
        let noise = NoiseModel {
            additive_sigma: 0.1,
            ..NoiseModel::none()
        };
        let d = gen_dataset(&p, 3, &noise, 10).unwrap();
        for m in d.measurements() {
            let c = d.class_index(&m.label).unwrap();
            for (e, w) in p[c].waveforms.iter().enumerate() {
                let got = &m.features[e * 2000..(e + 1) * 2000];
                let dev: Vec<f64> = got.iter().zip(w).map(|(a, b)| a - b).collect();
                let ratio = rms(&dev) / (0.1 * rms(w));
                assert!((0.8..=1.2).contains(&ratio), "ratio {ratio}");
            }
        }
    }

    #[test]
    fn shifts_stay_in_bounds_and_are_shared() {
        let noise = NoiseModel {
            max_shift: 0.05,
            ..NoiseModel::none()
        };
        let samples = 30_000;
        let mut seen_nonzero = false;
        for m in 0..200 {
            let s = realized_shift(&noise, samples, 200, 0, m, 3);
            assert!(s.abs() <= 1500);
            seen_nonzero |= s != 0;
        }
        assert!(seen_nonzero);

        let p = gen_profiles(1, 2, 400, 4).unwrap();
        let d = gen_dataset(&p, 5, &NoiseModel { max_shift: 0.1, ..NoiseModel::none() }, 3).unwrap();
        for (m, meas) in d.measurements().iter().enumerate() {
            let s = realized_shift(&NoiseModel { max_shift: 0.1, ..NoiseModel::none() }, 400, 5, 0, m, 3);
            for (e, w) in p[0].waveforms.iter().enumerate() {
                for t in 0..400 {
                    let src = (t as i64 - s).rem_euclid(400) as usize;
                    assert_eq!(meas.features[e * 400 + t], w[src]);
                }
            }
        }
    }

    #[test]
    fn invalid_noise_is_rejected() {
        let p = gen_profiles(2, 1, 10, 0).unwrap();
        for bad in [
            NoiseModel { additive_sigma: -1.0, ..NoiseModel::none() },
            NoiseModel { max_shift: 0.5, ..NoiseModel::none() },
            NoiseModel { amplitude_jitter: f64::NAN, ..NoiseModel::none() },
        ] {
            assert!(gen_dataset(&p, 1, &bad, 0).is_err());
        }
        assert!(gen_dataset(&p, 0, &NoiseModel::none(), 0).is_err());
        assert!(gen_profiles(2, 8, 10, 0).is_err());
    }

    #[test]
    fn low_noise_is_exactly_separable_by_1nn() {
        let p = gen_profiles(10, 2, 300, 8).unwrap();
        let noise = NoiseModel {
            additive_sigma: 1e-4,
            ..NoiseModel::none()
        };
        let train = gen_dataset(&p, 3, &noise, 1).unwrap();
        let test = gen_dataset(&p, 3, &noise, 2).unwrap();
        let m = knn_train(&train, 1).unwrap();
        for x in test.measurements() {
            assert_eq!(m.predict(&x.features), x.label);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn features_are_non_negative_and_reproducible(
            seed in 0u64..1000,
            sigma in 0.0f64..3.0,
            shift in 0.0f64..0.49,
            jitter in 0.0f64..1.0,
            floor in 0.0f64..5.0,
        ) {
            let p = gen_profiles(3, 2, 50, seed).unwrap();
            let noise = NoiseModel { additive_sigma: sigma, max_shift: shift, amplitude_jitter: jitter, background_floor: floor };
            let d = gen_dataset(&p, 2, &noise, seed).unwrap();
            prop_assert!(d.measurements().iter().all(|m| m.features.iter().all(|&v| v >= 0.0)));
            prop_assert_eq!(&d, &gen_dataset(&p, 2, &noise, seed).unwrap());
        }
    }
}
