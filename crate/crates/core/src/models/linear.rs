//! Least squares with optional L2 (ridge) or L1 (lasso) penalty.
//!
//! Objectives, with residual `r = y - Xw - b` and an unpenalized bias:
//!
//! * none:  `0.5 * |r|^2`
//! * ridge: `0.5 * |r|^2 + 0.5 * lambda * |w|^2`
//! * lasso: `0.5 * |r|^2 + lambda * |w|_1`
//!
//! Centering `X` and `y` removes the bias exactly. Ridge and plain least
//! squares are then solved through the normal equations
//! `(Xc'Xc + lambda I) w = Xc'yc`; lasso by cyclic coordinate descent.

use serde::{Deserialize, Serialize};

use super::{check_design, ModelError};

pub const LASSO_TOLERANCE: f64 = 1e-8;
const LASSO_MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "penalty", content = "lambda", rename_all = "lowercase")]
pub enum Regularization {
    None,
    L2(f64),
    L1(f64),
}

impl Regularization {
    pub fn lambda(self) -> f64 {
        match self {
            Regularization::None => 0.0,
            Regularization::L2(l) | Regularization::L1(l) => l,
        }
    }

    pub fn penalty(self, weights: &[f64]) -> f64 {
        match self {
            Regularization::None => 0.0,
            Regularization::L2(l) => 0.5 * l * weights.iter().map(|w| w * w).sum::<f64>(),
            Regularization::L1(l) => l * weights.iter().map(|w| w.abs()).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization: Regularization,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + dot(&self.weights, x)
    }

    /// Penalized training objective of this model on `(x, y)`.
    pub fn objective(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        objective(&self.weights, self.bias, x, y, self.regularization)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn objective(
    weights: &[f64],
    bias: f64,
    x: &[Vec<f64>],
    y: &[f64],
    reg: Regularization,
) -> f64 {
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, t)| {
            let r = t - bias - dot(weights, row);
            r * r
        })
        .sum();
    0.5 * rss + reg.penalty(weights)
}

struct Centered {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

fn center(x: &[Vec<f64>], y: &[f64]) -> Centered {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut x_mean = vec![0.0; d];
    for row in x {
        x_mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
    }
    let y_mean = y.iter().sum::<f64>() / n;
    Centered {
        x: x.iter()
            .map(|row| row.iter().zip(&x_mean).map(|(v, m)| v - m).collect())
            .collect(),
        y: y.iter().map(|v| v - y_mean).collect(),
        x_mean,
        y_mean,
    }
}

/// Solves the symmetric positive definite system `a z = b` by Cholesky.
/// Fails when a pivot falls below `1e-12` times the largest diagonal.
pub(crate) fn cholesky_solve(mut a: Vec<Vec<f64>>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n)
        .map(|i| a[i][i].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= a[j][k] * a[j][k];
        }
        if diag <= 1e-12 * scale {
            return None;
        }
        let diag = diag.sqrt();
        a[j][j] = diag;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / diag;
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= a[i][k] * z[k];
        }
        z[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= a[k][i] * z[k];
        }
        z[i] /= a[i][i];
    }
    Some(z)
}

pub fn fit_linear(
    x: &[Vec<f64>],
    y: &[f64],
    reg: Regularization,
) -> Result<LinearModel, ModelError> {
    check_design(x, y, 2)?;
    let lambda = reg.lambda();
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ModelError::Config(format!(
            "regularization strength must be >= 0, got {lambda}"
        )));
    }
    let c = center(x, y);
    let weights = match reg {
        Regularization::None | Regularization::L2(_) => solve_normal(&c, lambda)?,
        Regularization::L1(l) => lasso_cd(&c, l)?,
    };
    let bias = c.y_mean - dot(&weights, &c.x_mean);
    Ok(LinearModel {
        weights,
        bias,
        regularization: reg,
    })
}

fn solve_normal(c: &Centered, lambda: f64) -> Result<Vec<f64>, ModelError> {
    let d = c.x_mean.len();
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for (row, t) in c.x.iter().zip(&c.y) {
        for i in 0..d {
            rhs[i] += row[i] * t;
            for j in 0..=i {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        gram[i][i] += lambda;
        for j in 0..i {
            gram[j][i] = gram[i][j];
        }
    }
    cholesky_solve(gram, &rhs).ok_or(ModelError::Singular)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn lasso_cd(c: &Centered, lambda: f64) -> Result<Vec<f64>, ModelError> {
    let d = c.x_mean.len();
    let col_sq: Vec<f64> = (0..d)
        .map(|j| c.x.iter().map(|r| r[j] * r[j]).sum())
        .collect();
    let mut w = vec![0.0; d];
    let mut resid = c.y.clone();
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho: f64 =
                c.x.iter().zip(&resid).map(|(r, e)| r[j] * e).sum::<f64>() + col_sq[j] * w[j];
            let new = soft_threshold(rho, lambda) / col_sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, e) in c.x.iter().zip(resid.iter_mut()) {
                    *e -= r[j] * delta;
                }
                w[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < LASSO_TOLERANCE {
            return Ok(w);
        }
    }
    Err(ModelError::NotConverged("lasso coordinate descent".into()))
}
