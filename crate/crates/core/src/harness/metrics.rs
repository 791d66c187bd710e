//! MSE, accuracy, F1 and McNemar's test.
//!
//! McNemar uses the exact two-sided binomial test when the number of
//! discordant pairs `b + c` is below 25, otherwise the chi-square
//! statistic `max(|b - c| - 1, 0)^2 / (b + c)` with one degree of freedom.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{HarnessError, TaskKind};
use crate::direction::Direction;

pub const EXACT_THRESHOLD: u64 = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
}

fn check(a: usize, b: usize) -> Result<(), HarnessError> {
    if a != b {
        return Err(HarnessError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(HarnessError::Empty);
    }
    Ok(())
}

pub fn evaluate_regression(
    predictions: &[f64],
    labels: &[f64],
    task: TaskKind,
) -> Result<MetricsReport, HarnessError> {
    check(predictions.len(), labels.len())?;
    let mse = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l).powi(2))
        .sum::<f64>()
        / labels.len() as f64;
    Ok(MetricsReport {
        task,
        n: labels.len(),
        mse: Some(mse),
        accuracy: None,
        f1: None,
    })
}

/// Accuracy and F1 with `Increase` as the positive class. F1 is 0 when
/// there are no true positives.
pub fn evaluate_classification(
    predictions: &[Direction],
    labels: &[Direction],
) -> Result<MetricsReport, HarnessError> {
    check(predictions.len(), labels.len())?;
    let n = labels.len();
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    let tp = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| **p == Direction::Increase && **l == Direction::Increase)
        .count();
    let predicted_pos = predictions
        .iter()
        .filter(|p| **p == Direction::Increase)
        .count();
    let actual_pos = labels.iter().filter(|l| **l == Direction::Increase).count();
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (predicted_pos + actual_pos) as f64
    };
    Ok(MetricsReport {
        task: TaskKind::DirectionChange,
        n,
        mse: None,
        accuracy: Some(correct as f64 / n as f64),
        f1: Some(f1),
    })
}

/// Dispatches on the task; classification values are read as `>= 0.5`
/// meaning increase.
pub fn evaluate(
    predictions: &[f64],
    labels: &[f64],
    task: TaskKind,
) -> Result<MetricsReport, HarnessError> {
    if task.is_classification() {
        let to_dir = |v: &f64| {
            if *v >= 0.5 {
                Direction::Increase
            } else {
                Direction::Decrease
            }
        };
        let p: Vec<Direction> = predictions.iter().map(to_dir).collect();
        let l: Vec<Direction> = labels.iter().map(to_dir).collect();
        evaluate_classification(&p, &l)
    } else {
        evaluate_regression(predictions, labels, task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McNemarMethod {
    Exact,
    ChiSquareCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// A correct, B wrong.
    pub b: u64,
    /// A wrong, B correct.
    pub c: u64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

pub fn mcnemar(a_correct: &[bool], b_correct: &[bool]) -> Result<McNemarResult, HarnessError> {
    if a_correct.len() != b_correct.len() {
        return Err(HarnessError::LengthMismatch(
            a_correct.len(),
            b_correct.len(),
        ));
    }
    let b = a_correct
        .iter()
        .zip(b_correct)
        .filter(|(a, b)| **a && !**b)
        .count() as u64;
    let c = a_correct
        .iter()
        .zip(b_correct)
        .filter(|(a, b)| !**a && **b)
        .count() as u64;
    Ok(mcnemar_counts(b, c))
}

pub fn mcnemar_counts(b: u64, c: u64) -> McNemarResult {
    let n = b + c;
    if n < EXACT_THRESHOLD {
        let k = b.min(c);
        let mut tail = 0.0;
        let mut coef = 1.0_f64;
        for i in 0..=k {
            if i > 0 {
                coef = coef * (n - i + 1) as f64 / i as f64;
            }
            tail += coef;
        }
        let p = (2.0 * tail / 2f64.powi(n as i32)).min(1.0);
        McNemarResult {
            b,
            c,
            p_value: p,
            method: McNemarMethod::Exact,
        }
    } else {
        let diff = (b as f64 - c as f64).abs();
        let stat = (diff - 1.0).max(0.0).powi(2) / n as f64;
        McNemarResult {
            b,
            c,
            p_value: erfc((stat / 2.0).sqrt()).min(1.0),
            method: McNemarMethod::ChiSquareCorrected,
        }
    }
}
