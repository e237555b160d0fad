//! One-vs-rest logistic regression with l1 or l2 penalties, solved by
//! proximal gradient descent (FISTA). The l1 proximal step soft-thresholds,
//! so small coefficients become exactly zero. The bias is never penalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLogReg {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub penalty: Penalty,
    pub c: f64,
    /// One binary model per class, in class order.
    pub models: Vec<BinaryLogReg>,
}

const MAX_ITERATIONS: usize = 1000;
const GRAD_TOLERANCE: f64 = 1e-6;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(z: f64) -> f64 {
    // log(1 + e^z), stable for large |z|.
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Smooth part of the objective and its gradient at theta = (weights, bias):
/// C * sum_i log(1 + exp(-y_i z_i)), plus 0.5*||w||^2 when `l2`.
/// y entries are +-1; the gradient vector is laid out [d weights, bias].
pub fn smooth_value_grad(
    x: &[Vec<f64>],
    y: &[f64],
    weights: &[f64],
    bias: f64,
    c: f64,
    l2: bool,
) -> (f64, Vec<f64>) {
    let d = weights.len();
    let mut value = 0.0;
    let mut grad = vec![0.0f64; d + 1];
    for (row, &yi) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + bias;
        value += c * log1p_exp(-yi * z);
        // d/dz of log(1+e^{-yz}) = -y * sigmoid(-yz)
        let coeff = c * -yi * sigmoid(-yi * z);
        for (g, v) in grad[..d].iter_mut().zip(row) {
            *g += coeff * v;
        }
        grad[d] += coeff;
    }
    if l2 {
        value += 0.5 * weights.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grad[..d].iter_mut().zip(weights) {
            *g += w;
        }
    }
    (value, grad)
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

/// Largest eigenvalue of [X 1]^T [X 1] by power iteration, for the step size.
fn spectral_bound(x: &[Vec<f64>]) -> f64 {
    let d = x[0].len() + 1;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 1.0;
    for _ in 0..60 {
        let mut out = vec![0.0f64; d];
        for row in x {
            let dot: f64 =
                row.iter().zip(&v[..d - 1]).map(|(a, b)| a * b).sum::<f64>() + v[d - 1];
            for (o, r) in out[..d - 1].iter_mut().zip(row) {
                *o += dot * r;
            }
            out[d - 1] += dot;
        }
        let norm = out.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        lambda = norm;
        for (vi, oi) in v.iter_mut().zip(&out) {
            *vi = oi / norm;
        }
    }
    lambda
}

fn fit_binary(x: &[Vec<f64>], y: &[f64], penalty: Penalty, c: f64) -> BinaryLogReg {
    let d = x[0].len();
    let l2 = penalty == Penalty::L2;
    // Lipschitz constant of the smooth gradient: C/4 * lambda_max(+1 for l2).
    let lip = c / 4.0 * spectral_bound(x) + if l2 { 1.0 } else { 0.0 };
    let step = 1.0 / lip.max(1e-12);

    let mut theta = vec![0.0f64; d + 1];
    let mut momentum = theta.clone();
    let mut t_k = 1.0f64;
    let mut prev_obj = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        let (val, grad) = smooth_value_grad(x, y, &momentum[..d], momentum[d], c, l2);
        let mut next = vec![0.0f64; d + 1];
        for i in 0..=d {
            let raw = momentum[i] - step * grad[i];
            next[i] = if penalty == Penalty::L1 && i < d {
                soft_threshold(raw, step)
            } else {
                raw
            };
        }

        // Prox-gradient residual doubles as the convergence measure; for l2
        // it reduces to the plain gradient norm.
        let residual = momentum
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs() / step)
            .fold(0.0f64, f64::max);

        // FISTA momentum with restart when the objective climbs.
        let obj = val
            + if penalty == Penalty::L1 {
                momentum[..d].iter().map(|w| w.abs()).sum::<f64>()
            } else {
                0.0
            };
        let t_next = (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt()) / 2.0;
        if obj > prev_obj {
            t_k = 1.0;
            momentum = next.clone();
        } else {
            let beta = (t_k - 1.0) / t_next;
            momentum = next
                .iter()
                .zip(&theta)
                .map(|(n, p)| n + beta * (n - p))
                .collect();
            t_k = t_next;
        }
        prev_obj = obj;
        theta = next;
        if residual < GRAD_TOLERANCE {
            break;
        }
    }
    BinaryLogReg {
        weights: theta[..d].to_vec(),
        bias: theta[d],
    }
}

/// Trains one binary model per class (one-vs-rest). Labels are class
/// indices in 0..n_classes.
pub fn train_logistic_regression(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    penalty: Penalty,
    c: f64,
) -> Result<LogRegModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::EmptyInput("logistic regression training set".into()));
    }
    let present: std::collections::BTreeSet<usize> = y.iter().copied().collect();
    if present.len() < 2 {
        return Err(Error::Validation(
            "logistic regression needs at least two classes".into(),
        ));
    }
    let models = (0..n_classes)
        .map(|class| {
            let targets: Vec<f64> = y
                .iter()
                .map(|&yi| if yi == class { 1.0 } else { -1.0 })
                .collect();
            fit_binary(x, &targets, penalty, c)
        })
        .collect();
    Ok(LogRegModel { penalty, c, models })
}

impl LogRegModel {
    /// Per-class sigmoid scores normalized across classes to sum to 1.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let mut scores: Vec<f64> = self
                    .models
                    .iter()
                    .map(|m| {
                        let z: f64 =
                            row.iter().zip(&m.weights).map(|(a, b)| a * b).sum::<f64>() + m.bias;
                        sigmoid(z)
                    })
                    .collect();
                let sum: f64 = scores.iter().sum();
                if sum <= 0.0 {
                    let k = scores.len() as f64;
                    scores.iter_mut().for_each(|s| *s = 1.0 / k);
                } else {
                    scores.iter_mut().for_each(|s| *s /= sum);
                }
                scores
            })
            .collect()
    }

    pub fn zero_fraction(&self) -> f64 {
        let total: usize = self.models.iter().map(|m| m.weights.len()).sum();
        let zeros: usize = self
            .models
            .iter()
            .map(|m| m.weights.iter().filter(|w| **w == 0.0).count())
            .sum();
        zeros as f64 / total as f64
    }
}
