//! JSON scenario configuration. Every field is optional; command-line flags
//! take precedence over file values.

use std::fs;
use std::path::{Path, PathBuf};

use hpefp::event::{preset, CollectorConfig, ScenarioPreset};
use hpefp::mitigation::MitigationPolicy;
use hpefp::synth::NoiseModel;
use hpefp::{Error, Result};
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Preset name or an explicit collector configuration.
    pub scenario: Option<ScenarioSpec>,
    pub label: Option<String>,
    pub await_process: Option<String>,
    pub dataset: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub classifier: Option<ClassifierSpec>,
    pub normalize: Option<bool>,
    pub split: SplitSpec,
    pub mitigation: Option<MitigationPolicy>,
    pub synth: SynthSpec,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Name(String),
    Explicit(CollectorConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: String,
    #[serde(default)]
    pub hyperparameters: Value,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_per_class: Option<usize>,
    pub test_per_class: Option<usize>,
    pub folds: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: Option<usize>,
    pub per_class: Option<usize>,
    pub events: Option<usize>,
    pub samples: Option<usize>,
    pub noise: Option<NoiseModel>,
    pub data_seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }
}

/// Collector settings plus the scenario name recorded on measurements.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: CollectorConfig,
    pub target_process_pattern: Option<String>,
}

impl From<ScenarioPreset> for Scenario {
    fn from(p: ScenarioPreset) -> Self {
        Scenario {
            name: p.name.as_str().to_string(),
            config: p.config,
            target_process_pattern: Some(p.target_process_pattern),
        }
    }
}

/// A preset name, or a file holding a preset or a bare collector config.
pub fn resolve_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    match spec {
        ScenarioSpec::Explicit(config) => Ok(explicit("custom", config.clone())),
        ScenarioSpec::Name(name) => {
            let path = Path::new(name);
            if !path.is_file() {
                return preset(name).map(Scenario::from);
            }
            let text = fs::read_to_string(path)?;
            if let Ok(p) = serde_json::from_str::<ScenarioPreset>(&text) {
                return Ok(p.into());
            }
            let config: CollectorConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("scenario file {}: {e}", path.display())))?;
            let stem = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            Ok(explicit(&stem, config))
        }
    }
}

fn explicit(name: &str, config: CollectorConfig) -> Scenario {
    Scenario {
        name: name.to_string(),
        config,
        target_process_pattern: None,
    }
}

pub fn required<T>(value: Option<T>, flag: &str, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing {flag} (or `{key}` in the config file)")))
}
