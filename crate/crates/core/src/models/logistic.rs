//! L2-regularized logistic regression fitted by gradient descent with
//! Armijo backtracking.
//!
//! Objective: `mean_i [softplus(z_i) - y_i z_i] + 0.5 * lambda * |w|^2`
//! with `z_i = w.x_i + b`; the bias is not penalized.

use serde::{Deserialize, Serialize};

use super::linear::dot;
use super::{check_design, ModelError};
use crate::direction::Direction;

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 2_000_000;
const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub lambda: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    /// Probability of the positive class, kept strictly inside (0, 1).
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + dot(&self.weights, x)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.probability(x) >= self.threshold
    }

    pub fn predict_direction(&self, x: &[f64]) -> Direction {
        if self.predict(x) {
            Direction::Increase
        } else {
            Direction::Decrease
        }
    }

    pub fn objective(&self, x: &[Vec<f64>], y: &[bool]) -> f64 {
        objective(&self.weights, self.bias, x, y, self.lambda)
    }
}

pub fn objective(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[bool], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let nll: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = bias + dot(weights, row);
            softplus(z) - if label { z } else { 0.0 }
        })
        .sum();
    nll / n + 0.5 * lambda * dot(weights, weights)
}

/// Gradient of [`objective`]; the bias component comes last.
pub fn gradient(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[bool], lambda: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let d = weights.len();
    let mut g = vec![0.0; d + 1];
    for (row, &label) in x.iter().zip(y) {
        let err = sigmoid(bias + dot(weights, row)) - if label { 1.0 } else { 0.0 };
        for j in 0..d {
            g[j] += err * row[j] / n;
        }
        g[d] += err / n;
    }
    for j in 0..d {
        g[j] += lambda * weights[j];
    }
    g
}

pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], lambda: f64) -> Result<LogisticModel, ModelError> {
    let as_f64: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
    check_design(x, &as_f64, 2)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ModelError::Config(format!(
            "regularization strength must be >= 0, got {lambda}"
        )));
    }
    if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
        return Err(ModelError::SingleClass);
    }
    let d = x[0].len();
    let mut params = vec![0.0; d + 1];
    let mut value = objective(&params[..d], params[d], x, y, lambda);
    let mut step = 1.0;
    for _ in 0..MAX_ITERATIONS {
        let g = gradient(&params[..d], params[d], x, y, lambda);
        let g_sq = dot(&g, &g);
        if g_sq.sqrt() < GRADIENT_TOLERANCE {
            return Ok(LogisticModel {
                weights: params[..d].to_vec(),
                bias: params[d],
                threshold: 0.5,
                lambda,
            });
        }
        step *= 2.0;
        loop {
            let trial: Vec<f64> = params.iter().zip(&g).map(|(p, gi)| p - step * gi).collect();
            let trial_value = objective(&trial[..d], trial[d], x, y, lambda);
            if trial_value <= value - 0.5 * step * g_sq {
                params = trial;
                value = trial_value;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(ModelError::NotConverged("logistic line search".into()));
            }
        }
    }
    Err(ModelError::NotConverged("logistic gradient descent".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_toy() {
        let xs = [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0];
        let x: Vec<Vec<f64>> = xs.iter().map(|v| vec![*v]).collect();
        let y: Vec<bool> = xs.iter().map(|v| *v > 0.0).collect();
        let m = fit_logistic(&x, &y, 0.01).unwrap();
        let acc = x
            .iter()
            .zip(&y)
            .filter(|(r, l)| m.predict(r) == **l)
            .count();
        assert_eq!(acc, xs.len());
        let g = gradient(&m.weights, m.bias, &x, &y, 0.01);
        assert!(dot(&g, &g).sqrt() < GRADIENT_TOLERANCE);
    }

    #[test]
    fn mirrored_data_has_zero_bias() {
        let pts = [(0.3, 1.2), (1.5, -0.4), (2.2, 0.7), (0.9, 2.5), (-0.2, 0.8)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, &(a, b)) in pts.iter().enumerate() {
            let label = i % 2 == 0;
            x.push(vec![a, b]);
            y.push(label);
            x.push(vec![-a, -b]);
            y.push(!label);
        }
        let m = fit_logistic(&x, &y, 0.1).unwrap();
        assert!(m.bias.abs() < 1e-4, "bias {}", m.bias);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_logistic(&x, &[true, true], 0.1),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn probabilities_stay_open() {
        let m = LogisticModel {
            weights: vec![1e6],
            bias: 0.0,
            threshold: 0.5,
            lambda: 0.0,
        };
        let p = m.probability(&[1.0]);
        assert!(p > 0.0 && p < 1.0);
        let q = m.probability(&[-1.0]);
        assert!(q > 0.0 && q < 1.0);
    }
}
