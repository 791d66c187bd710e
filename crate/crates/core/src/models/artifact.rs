//! Versioned JSON model artifacts. Parameters are stored as base64 of
//! little-endian `f64` bytes, keyed by tensor name, with their shapes.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::darnn::{AttentionRnn, DarnnConfig, DarnnParams, Scaling, PARAM_NAMES};
use super::linear::{LinearModel, Regularization};
use super::logistic::LogisticModel;
use super::text_classifier::TextClassifier;
use super::{InputClass, ModelError};
use crate::embed::EmbedderSpec;

pub const FORMAT_VERSION: u32 = 1;

/// A trained model of any architecture.
#[derive(Debug, Clone)]
pub enum Model {
    Linear(LinearModel),
    Logistic(LogisticModel),
    Darnn(AttentionRnn),
    TextClassifier(TextClassifier),
}

impl Model {
    pub fn architecture(&self) -> &'static str {
        match self {
            Model::Linear(m) => match m.regularization {
                Regularization::None => "linear",
                Regularization::L2(_) => "ridge",
                Regularization::L1(_) => "lasso",
            },
            Model::Logistic(_) => "logistic",
            Model::Darnn(_) => "darnn",
            Model::TextClassifier(_) => "text-classifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub kind: InputClass,
    pub architecture: String,
    pub shapes: BTreeMap<String, Vec<usize>>,
    pub parameters: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub config: Value,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(text: &str) -> Result<Vec<f64>, ModelError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| ModelError::Artifact(e.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(ModelError::Artifact(
            "parameter bytes not a multiple of 8".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

struct Builder {
    shapes: BTreeMap<String, Vec<usize>>,
    parameters: BTreeMap<String, String>,
}

impl Builder {
    fn new() -> Self {
        Self {
            shapes: BTreeMap::new(),
            parameters: BTreeMap::new(),
        }
    }

    fn put(&mut self, name: &str, shape: Vec<usize>, values: &[f64]) {
        self.shapes.insert(name.to_owned(), shape);
        self.parameters.insert(name.to_owned(), encode(values));
    }
}

impl ModelArtifact {
    pub fn from_model(model: &Model, kind: InputClass) -> Self {
        let mut b = Builder::new();
        let (seed, config) = match model {
            Model::Linear(m) => {
                b.put("weights", vec![m.weights.len()], &m.weights);
                b.put("bias", vec![1], &[m.bias]);
                (None, json!({ "regularization": m.regularization }))
            }
            Model::Logistic(m) => {
                b.put("weights", vec![m.weights.len()], &m.weights);
                b.put("bias", vec![1], &[m.bias]);
                (
                    None,
                    json!({ "threshold": m.threshold, "lambda": m.lambda }),
                )
            }
            Model::Darnn(m) => {
                for (name, t) in PARAM_NAMES.iter().zip(m.params.tensors()) {
                    b.put(name, vec![t.rows, t.cols], &t.data);
                }
                (
                    Some(m.config.seed),
                    json!({ "model": m.config, "scaling": m.scaling }),
                )
            }
            Model::TextClassifier(m) => {
                let head = m.head();
                b.put("weights", vec![head.weights.len()], &head.weights);
                b.put("bias", vec![1], &[head.bias]);
                let spec = m.embedder().spec();
                let seed = match spec {
                    EmbedderSpec::Hashing { seed, .. } => Some(seed),
                    EmbedderSpec::External(_) => None,
                };
                (
                    seed,
                    json!({ "threshold": head.threshold, "lambda": head.lambda, "embedder": spec }),
                )
            }
        };
        ModelArtifact {
            format_version: FORMAT_VERSION,
            kind,
            architecture: model.architecture().to_owned(),
            shapes: b.shapes,
            parameters: b.parameters,
            seed,
            config,
        }
    }

    /// Attaches an extra named tensor, such as preprocessing statistics.
    pub fn with_parameter(mut self, name: &str, shape: Vec<usize>, values: &[f64]) -> Self {
        self.shapes.insert(name.to_owned(), shape);
        self.parameters.insert(name.to_owned(), encode(values));
        self
    }

    /// Decodes a stored tensor, checking it against its shape.
    pub fn parameter(&self, name: &str) -> Result<Vec<f64>, ModelError> {
        self.get(name)
    }

    fn get(&self, name: &str) -> Result<Vec<f64>, ModelError> {
        let text = self
            .parameters
            .get(name)
            .ok_or_else(|| ModelError::Artifact(format!("missing parameter {name}")))?;
        let values = decode(text)?;
        let expected: usize = self
            .shapes
            .get(name)
            .ok_or_else(|| ModelError::Artifact(format!("missing shape for {name}")))?
            .iter()
            .product();
        if values.len() != expected {
            return Err(ModelError::Artifact(format!(
                "{name} has {} values, shape says {expected}",
                values.len()
            )));
        }
        Ok(values)
    }

    fn config_field<T: serde::de::DeserializeOwned>(&self, field: &str) -> Result<T, ModelError> {
        serde_json::from_value(self.config.get(field).cloned().unwrap_or(Value::Null))
            .map_err(|e| ModelError::Artifact(format!("config.{field}: {e}")))
    }

    pub fn to_model(&self) -> Result<Model, ModelError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ModelError::Artifact(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let scalar = |name: &str| -> Result<f64, ModelError> {
            self.get(name)?
                .first()
                .copied()
                .ok_or_else(|| ModelError::Artifact(format!("{name} is empty")))
        };
        match self.architecture.as_str() {
            "linear" | "ridge" | "lasso" => Ok(Model::Linear(LinearModel {
                weights: self.get("weights")?,
                bias: scalar("bias")?,
                regularization: self.config_field("regularization")?,
            })),
            "logistic" => Ok(Model::Logistic(LogisticModel {
                weights: self.get("weights")?,
                bias: scalar("bias")?,
                threshold: self.config_field("threshold")?,
                lambda: self.config_field("lambda")?,
            })),
            "darnn" => {
                let config: DarnnConfig = self.config_field("model")?;
                let scaling: Scaling = self.config_field("scaling")?;
                let mut model = AttentionRnn::new(config)?;
                let mut params: DarnnParams = model.params.clone();
                for (name, t) in PARAM_NAMES.iter().zip(params.tensors_mut()) {
                    let shape = self.shapes.get(*name).cloned().unwrap_or_default();
                    if shape != [t.rows, t.cols] {
                        return Err(ModelError::Artifact(format!(
                            "{name} shape {shape:?} != [{}, {}]",
                            t.rows, t.cols
                        )));
                    }
                    t.data = self.get(name)?;
                }
                model.params = params;
                model.scaling = scaling;
                Ok(Model::Darnn(model))
            }
            "text-classifier" => {
                let spec: EmbedderSpec = self.config_field("embedder")?;
                let head = LogisticModel {
                    weights: self.get("weights")?,
                    bias: scalar("bias")?,
                    threshold: self.config_field("threshold")?,
                    lambda: self.config_field("lambda")?,
                };
                Ok(Model::TextClassifier(TextClassifier::from_parts(
                    spec.build()?,
                    head,
                )?))
            }
            other => Err(ModelError::Artifact(format!(
                "unknown architecture {other:?}"
            ))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Artifact(e.to_string()))
    }
}
