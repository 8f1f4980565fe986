use serde_json::Value;

use super::normalized::NormalizedModel;
use super::{knn, net, svm, tree, ClassifierKind, Model, ModelFile, Trainer};
use crate::error::{Error, Result};

/// Builds trainers from hyperparameters and decodes saved models for one
/// classifier kind.
pub trait ClassifierFactory: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> ClassifierKind;

    fn description(&self) -> &'static str;

    fn trainer(&self, hyperparameters: &Value) -> Result<Box<dyn Trainer>>;

    /// Decodes the kind-specific part of a model file.
    fn decode(&self, file: &ModelFile) -> Result<Box<dyn Model>>;
}

/// Classifier factories by name.
pub struct Registry {
    factories: Vec<Box<dyn ClassifierFactory>>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::builtin()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry { factories: Vec::new() }
    }

    /// kNN, decision tree, linear SVM and the stacked-autoencoder network.
    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(knn::KnnFactory));
        r.register(Box::new(tree::TreeFactory));
        r.register(Box::new(svm::SvmFactory));
        r.register(Box::new(net::NetFactory));
        r
    }

    /// Replaces any factory already registered under the same name.
    pub fn register(&mut self, factory: Box<dyn ClassifierFactory>) {
        self.factories.retain(|f| f.name() != factory.name());
        self.factories.push(factory);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ClassifierFactory> {
        self.factories
            .iter()
            .find(|f| f.name() == name)
            .map(|f| f.as_ref())
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown classifier `{name}` (registered: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.iter().map(|f| f.name()).collect()
    }

    pub fn factories(&self) -> impl Iterator<Item = &dyn ClassifierFactory> {
        self.factories.iter().map(|f| f.as_ref())
    }

    pub fn trainer(&self, name: &str, hyperparameters: &Value) -> Result<Box<dyn Trainer>> {
        self.get(name)?.trainer(hyperparameters)
    }

    pub fn decode(&self, file: &ModelFile) -> Result<Box<dyn Model>> {
        file.check_header()?;
        let model = self.get(file.kind.name())?.decode(file)?;
        if model.classes() != file.classes.as_slice() {
            return Err(Error::data("decoded model classes differ from the file header"));
        }
        Ok(match &file.normalization {
            Some(n) => {
                let params = n.decode()?;
                if params.feature_len().is_some_and(|len| len != file.input_len) {
                    return Err(Error::data("normalization length differs from the model input length"));
                }
                Box::new(NormalizedModel::new(params, model))
            }
            None => model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let r = Registry::builtin();
        assert_eq!(r.names(), vec!["knn", "dt", "svm", "net"]);
        for f in r.factories() {
            assert_eq!(f.kind().name(), f.name());
        }
        let err = r.trainer("cnn", &Value::Null).err().unwrap();
        assert!(err.to_string().contains("registered: knn, dt, svm, net"));
    }

    #[test]
    fn unknown_hyperparameter_rejected() {
        let r = Registry::builtin();
        let err = r.trainer("knn", &serde_json::json!({"kk": 3})).err().unwrap();
        assert!(err.to_string().contains("unknown hyperparameter `kk`"));
    }
}
