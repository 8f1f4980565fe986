//! Versioned JSON model files. Weight arrays are base64 strings of
//! little-endian f64 values, so files round-trip bit-exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ClassifierKind, Model, Registry};
use crate::dataset::{Normalization, NormalizationMode};
use crate::encoding::{decode_f64s, encode_f64s};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "hpefp-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub kind: ClassifierKind,
    pub classes: Vec<String>,
    pub input_len: usize,
    pub seed: u64,
    pub hyperparameters: Value,
    pub normalization: Option<EncodedNormalization>,
    /// Free-form reproduction data such as input digests.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedNormalization {
    pub mode: NormalizationMode,
    pub min: String,
    pub max: String,
}

impl EncodedNormalization {
    fn encode(n: &Normalization) -> Self {
        EncodedNormalization {
            mode: n.mode,
            min: encode_f64s(&n.min),
            max: encode_f64s(&n.max),
        }
    }

    pub fn decode(&self) -> Result<Normalization> {
        let min = decode_f64s(&self.min)?;
        let max = decode_f64s(&self.max)?;
        if min.len() != max.len() {
            return Err(Error::data("normalization min and max differ in length"));
        }
        Ok(Normalization {
            mode: self.mode,
            min,
            max,
        })
    }
}

impl ModelFile {
    pub fn from_model(model: &dyn Model, provenance: BTreeMap<String, String>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: model.kind(),
            classes: model.classes().to_vec(),
            input_len: model.input_len(),
            seed: model.meta().seed,
            hyperparameters: model.meta().hyperparameters.clone(),
            normalization: model.normalization().map(EncodedNormalization::encode),
            provenance,
            params: model.params_json(),
        }
    }

    pub fn check_header(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::data(format!("not a model file (format `{}`)", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::data(format!("unsupported model file version {}", self.version)));
        }
        Ok(())
    }

    pub fn meta(&self) -> super::TrainingMeta {
        super::TrainingMeta {
            seed: self.seed,
            hyperparameters: self.hyperparameters.clone(),
            wall_time_s: 0.0,
        }
    }

    /// Kind-specific parameters deserialized into `T`.
    pub(crate) fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| Error::data(format!("bad {} model parameters: {e}", self.kind)))
    }
}

pub fn write_model(model: &dyn Model, w: &mut impl Write, provenance: BTreeMap<String, String>) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, &ModelFile::from_model(model, provenance))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_model(r: impl Read, registry: &Registry) -> Result<Box<dyn Model>> {
    let file: ModelFile = serde_json::from_reader(r)?;
    registry.decode(&file)
}

pub fn save_model(model: &dyn Model, path: &Path, provenance: BTreeMap<String, String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w, provenance)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path, registry: &Registry) -> Result<Box<dyn Model>> {
    read_model(BufReader::new(File::open(path)?), registry)
}
