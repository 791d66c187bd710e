//! Predictors: rule baselines, the linear family, logistic regression, the
//! dual-stage attention RNN and a text classifier over prompt embeddings,
//! plus the glue that combines textual (T) and financial (F) features.

pub mod artifact;
pub mod baseline;
pub mod darnn;
pub mod linear;
pub mod logistic;
pub mod text_classifier;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifact::{Model, ModelArtifact};
pub use baseline::{financial_baseline, BaselineContext, BaselineKind, Prediction};
pub use darnn::{
    gradient_check, train_darnn, AttentionRnn, DarnnConfig, DarnnSample, TrainOptions,
};
pub use linear::{fit_linear, LinearModel, Regularization};
pub use logistic::{fit_logistic, LogisticModel};
pub use text_classifier::{fit_text_classifier, TextClassifier};

use crate::direction::Direction;
use crate::ingest::Indicator;
use crate::narrative::{build_integration_prompt, LlmAnalysis, NarrativeError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("singular system; use a regularization strength lambda > 0")]
    Singular,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("missing baseline context: {0}")]
    MissingContext(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} did not converge")]
    NotConverged(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("embedding failed: {0}")]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Narrative(#[from] NarrativeError),
    #[error("bad model artifact: {0}")]
    Artifact(String),
}

/// Checks a design matrix: at least `min_rows` rows, matching lengths, a
/// common nonzero width and finite entries.
pub(crate) fn check_design(x: &[Vec<f64>], y: &[f64], min_rows: usize) -> Result<(), ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::Shape(format!(
            "{} rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_rows {
        return Err(ModelError::Shape(format!(
            "need at least {min_rows} samples, got {}",
            x.len()
        )));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(ModelError::Shape("zero feature dimension".into()));
    }
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(ModelError::Shape(format!(
            "row {i} has {} features, expected {d}",
            x[i].len()
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("training data".into()));
    }
    Ok(())
}

/// Which signals a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputClass {
    F,
    T,
    #[serde(rename = "TF")]
    Tf,
}

impl InputClass {
    pub fn uses_text(self) -> bool {
        self != InputClass::F
    }

    pub fn uses_financial(self) -> bool {
        self != InputClass::T
    }
}

impl fmt::Display for InputClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputClass::F => "F",
            InputClass::T => "T",
            InputClass::Tf => "TF",
        })
    }
}

impl FromStr for InputClass {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "F" => Ok(InputClass::F),
            "T" => Ok(InputClass::T),
            "TF" | "FT" => Ok(InputClass::Tf),
            _ => Err(ModelError::Config(format!("unknown input class {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelKind {
    pub input: InputClass,
    pub architecture: String,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.input, self.architecture)
    }
}

/// Model input produced by [`combine_features`].
#[derive(Debug, Clone, PartialEq)]
pub enum CombinedInput {
    Vector(Vec<f64>),
    Exogenous {
        drivers: Vec<Vec<f64>>,
        history: Vec<f64>,
    },
    Prompt(String),
}

/// Feature groups for one sample.
#[derive(Debug, Clone, Copy)]
pub enum TextFeatures<'a> {
    /// A flat T block.
    Flat(&'a [f64]),
    /// One text vector per time step.
    Steps(&'a [Vec<f64>]),
    /// An LLM analysis plus recent directions for the integration prompt.
    Analysis {
        analysis: &'a LlmAnalysis,
        directions: &'a [Direction],
        target: &'a Indicator,
        horizon: u32,
    },
}

/// Concatenation puts the T block first: `[T || F]`.
pub fn concat_features(t: &[f64], f: &[f64]) -> Vec<f64> {
    t.iter().chain(f).copied().collect()
}

pub fn combine_features(t: TextFeatures<'_>, f: &[f64]) -> Result<CombinedInput, ModelError> {
    match t {
        TextFeatures::Flat(t) => Ok(CombinedInput::Vector(concat_features(t, f))),
        TextFeatures::Steps(steps) => {
            if steps.len() != f.len() {
                return Err(ModelError::Shape(format!(
                    "{} text steps but {} financial steps",
                    steps.len(),
                    f.len()
                )));
            }
            let width = steps.first().map_or(0, Vec::len);
            if width == 0 || steps.iter().any(|s| s.len() != width) {
                return Err(ModelError::Shape(
                    "text steps must share a nonzero width".into(),
                ));
            }
            Ok(CombinedInput::Exogenous {
                drivers: steps.to_vec(),
                history: f.to_vec(),
            })
        }
        TextFeatures::Analysis {
            analysis,
            directions,
            target,
            horizon,
        } => Ok(CombinedInput::Prompt(build_integration_prompt(
            analysis, directions, target, horizon,
        )?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_dims_and_order() {
        let t = [1.0; 7];
        let f = [2.0; 7];
        let CombinedInput::Vector(v) = combine_features(TextFeatures::Flat(&t), &f).unwrap() else {
            panic!()
        };
        assert_eq!(v.len(), 14);
        assert_eq!(&v[..7], &t);
        assert_eq!(&v[7..], &f);
    }

    #[test]
    fn zeroed_text_block_equals_f_only_model() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let i = i as f64;
                vec![i.sin(), (i * 0.7).cos(), i, (i * 1.3).sin()]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] - 2.0 * r[2] + 0.5 * r[3]).collect();
        let m = fit_linear(&x, &y, Regularization::L2(0.1)).unwrap();
        let f = [0.4, -1.2];
        let zeroed = concat_features(&[0.0, 0.0], &f);
        let f_only = LinearModel {
            weights: m.weights[2..].to_vec(),
            bias: m.bias,
            regularization: m.regularization,
        };
        assert_eq!(m.predict(&zeroed), f_only.predict(&f));
    }

    #[test]
    fn exogenous_shape() {
        let steps = vec![vec![0.1, 0.2, 0.3]; 7];
        let f = [1.0; 7];
        let CombinedInput::Exogenous { drivers, history } =
            combine_features(TextFeatures::Steps(&steps), &f).unwrap()
        else {
            panic!()
        };
        assert_eq!((drivers.len(), drivers[0].len()), (7, 3));
        assert_eq!(history.len(), 7);
        assert!(combine_features(TextFeatures::Steps(&steps), &[1.0; 6]).is_err());
    }

    #[test]
    fn input_class_round_trip() {
        for c in [InputClass::F, InputClass::T, InputClass::Tf] {
            assert_eq!(c.to_string().parse::<InputClass>().unwrap(), c);
        }
    }
}
