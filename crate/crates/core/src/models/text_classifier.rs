//! Logistic head over prompt embeddings, used as the second stage of the
//! analyse-then-predict pipeline.

use super::logistic::{fit_logistic, LogisticModel};
use super::ModelError;
use crate::direction::Direction;
use crate::embed::Embedder;

pub const DEFAULT_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct TextClassifier {
    embedder: Embedder,
    head: LogisticModel,
}

impl TextClassifier {
    pub fn from_parts(embedder: Embedder, head: LogisticModel) -> Result<Self, ModelError> {
        if head.weights.len() != embedder.dimension() {
            return Err(ModelError::Shape(format!(
                "head has {} weights but embedder dimension is {}",
                head.weights.len(),
                embedder.dimension()
            )));
        }
        Ok(Self { embedder, head })
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    pub fn head(&self) -> &LogisticModel {
        &self.head
    }

    pub fn probability(&self, prompt: &str) -> Result<f64, ModelError> {
        Ok(self
            .head
            .probability(self.embedder.embed_text(prompt)?.as_slice()))
    }

    pub fn predict(&self, prompt: &str) -> Result<Direction, ModelError> {
        Ok(self
            .head
            .predict_direction(self.embedder.embed_text(prompt)?.as_slice()))
    }

    pub fn predict_batch(&self, prompts: &[&str]) -> Result<Vec<Direction>, ModelError> {
        Ok(self
            .embedder
            .embed_batch(prompts)?
            .iter()
            .map(|v| self.head.predict_direction(v.as_slice()))
            .collect())
    }
}

pub fn fit_text_classifier(
    prompts: &[&str],
    labels: &[bool],
    embedder: Embedder,
    lambda: f64,
) -> Result<TextClassifier, ModelError> {
    if prompts.len() != labels.len() {
        return Err(ModelError::Shape(format!(
            "{} prompts but {} labels",
            prompts.len(),
            labels.len()
        )));
    }
    let x: Vec<Vec<f64>> = embedder
        .embed_batch(prompts)?
        .into_iter()
        .map(|v| v.0)
        .collect();
    let head = fit_logistic(&x, labels, lambda)?;
    Ok(TextClassifier { embedder, head })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> (Vec<&'static str>, Vec<bool>) {
        let prompts = vec![
            "stocks surge after earnings",
            "a surge in buying",
            "markets surge on jobs data",
            "prices plunge on fears",
            "shares plunge again",
            "a sudden plunge today",
        ];
        let labels = vec![true, true, true, false, false, false];
        (prompts, labels)
    }

    #[test]
    fn separable_tokens() {
        let (p, l) = corpus();
        let clf =
            fit_text_classifier(&p, &l, Embedder::hashing(64, 3).unwrap(), DEFAULT_LAMBDA).unwrap();
        let preds = clf.predict_batch(&p).unwrap();
        for (pred, label) in preds.iter().zip(&l) {
            assert_eq!(pred.bit() == 1, *label);
        }
    }

    #[test]
    fn conflicting_duplicates() {
        let p = [
            "same words here",
            "same words here",
            "other text",
            "more text",
        ];
        let l = [true, false, true, false];
        let clf =
            fit_text_classifier(&p, &l, Embedder::hashing(64, 3).unwrap(), DEFAULT_LAMBDA).unwrap();
        let pred = clf.predict("same words here").unwrap().bit() == 1;
        let correct = l[..2].iter().filter(|&&x| x == pred).count();
        assert!(correct as f64 / 2.0 <= 0.5);
    }

    #[test]
    fn deterministic_and_single_class_error() {
        let (p, l) = corpus();
        let a =
            fit_text_classifier(&p, &l, Embedder::hashing(32, 9).unwrap(), DEFAULT_LAMBDA).unwrap();
        let b =
            fit_text_classifier(&p, &l, Embedder::hashing(32, 9).unwrap(), DEFAULT_LAMBDA).unwrap();
        assert_eq!(a.head(), b.head());
        assert!(matches!(
            fit_text_classifier(
                &p,
                &[true; 6],
                Embedder::hashing(32, 9).unwrap(),
                DEFAULT_LAMBDA
            ),
            Err(ModelError::SingleClass)
        ));
    }
}
