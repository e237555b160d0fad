//! Single-hidden-layer perceptron: 100 rectified-linear units, softmax
//! output, cross-entropy loss, full-batch Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;
const LEARNING_RATE: f64 = 1e-3;
const LOSS_TOLERANCE: f64 = 1e-4;
const PATIENCE: usize = 10;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Parameter layout inside the flat vector: w1 (hidden x input, row-major),
/// b1, w2 (classes x hidden, row-major), b2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl MlpShape {
    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.hidden + self.classes * self.hidden + self.classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub shape: MlpShape,
    pub params: Vec<f64>,
}

fn forward_row(shape: &MlpShape, params: &[f64], row: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (d, h, k) = (shape.input, shape.hidden, shape.classes);
    let w1 = &params[..h * d];
    let b1 = &params[h * d..h * d + h];
    let w2 = &params[h * d + h..h * d + h + k * h];
    let b2 = &params[h * d + h + k * h..];

    let mut hidden = vec![0.0f64; h];
    for (j, hv) in hidden.iter_mut().enumerate() {
        let z: f64 = w1[j * d..(j + 1) * d]
            .iter()
            .zip(row)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + b1[j];
        *hv = z.max(0.0);
    }
    let mut logits = vec![0.0f64; k];
    for (c, lv) in logits.iter_mut().enumerate() {
        *lv = w2[c * h..(c + 1) * h]
            .iter()
            .zip(&hidden)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + b2[c];
    }
    (hidden, logits)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy over the batch plus its gradient in the flat layout.
/// Shared with the finite-difference oracle in tests.
pub fn loss_and_grad(
    shape: &MlpShape,
    params: &[f64],
    x: &[Vec<f64>],
    y: &[usize],
) -> (f64, Vec<f64>) {
    let (d, h, k) = (shape.input, shape.hidden, shape.classes);
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0f64; params.len()];
    let w2_off = h * d + h;

    for (row, &yi) in x.iter().zip(y) {
        let (hidden, logits) = forward_row(shape, params, row);
        let proba = softmax(&logits);
        loss += -(proba[yi].max(1e-300)).ln();

        // dL/dlogit_c = p_c - 1{c = y}
        let mut dlogits = proba;
        dlogits[yi] -= 1.0;

        let mut dhidden = vec![0.0f64; h];
        for (c, &dl) in dlogits.iter().enumerate() {
            for j in 0..h {
                grad[w2_off + c * h + j] += dl * hidden[j] / n;
                dhidden[j] += dl * params[w2_off + c * h + j];
            }
            grad[w2_off + k * h + c] += dl / n;
        }
        for (j, dh) in dhidden.iter().enumerate() {
            if hidden[j] > 0.0 {
                for (i, v) in row.iter().enumerate() {
                    grad[j * d + i] += dh * v / n;
                }
                grad[h * d + j] += dh / n;
            }
        }
    }
    (loss / n, grad)
}

/// Trains with Adam; stops early after `PATIENCE` consecutive epochs whose
/// loss improvement falls under `LOSS_TOLERANCE`. A non-finite loss aborts
/// with the offending epoch.
pub fn train_mlp(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    hidden: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<MlpModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::EmptyInput("mlp training set".into()));
    }
    let present: std::collections::BTreeSet<usize> = y.iter().copied().collect();
    if present.len() < 2 {
        return Err(Error::Validation("mlp needs at least two classes".into()));
    }
    let shape = MlpShape {
        input: x[0].len(),
        hidden,
        classes: n_classes,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0f64; shape.param_count()];
    let (d, h) = (shape.input, shape.hidden);
    let r1 = (2.0 / d as f64).sqrt();
    for p in params[..h * d].iter_mut() {
        *p = (rng.gen::<f64>() * 2.0 - 1.0) * r1;
    }
    let r2 = (2.0 / h as f64).sqrt();
    let w2_off = h * d + h;
    for p in params[w2_off..w2_off + n_classes * h].iter_mut() {
        *p = (rng.gen::<f64>() * 2.0 - 1.0) * r2;
    }

    let mut m = vec![0.0f64; params.len()];
    let mut v = vec![0.0f64; params.len()];
    let mut prev_loss = f64::INFINITY;
    let mut stall = 0usize;

    for epoch in 0..max_iterations {
        let (loss, grad) = loss_and_grad(&shape, &params, x, y);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let t = (epoch + 1) as f64;
        for i in 0..params.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            let m_hat = m[i] / (1.0 - BETA1.powf(t));
            let v_hat = v[i] / (1.0 - BETA2.powf(t));
            params[i] -= LEARNING_RATE * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        if prev_loss - loss < LOSS_TOLERANCE {
            stall += 1;
            if stall >= PATIENCE {
                break;
            }
        } else {
            stall = 0;
        }
        prev_loss = loss;
    }
    Ok(MlpModel { shape, params })
}

impl MlpModel {
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let (_, logits) = forward_row(&self.shape, &self.params, row);
                softmax(&logits)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let corners = [(0.0, 0.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..25 {
            for (a, b, label) in corners {
                x.push(vec![
                    a + 0.05 * (rng.gen::<f64>() - 0.5),
                    b + 0.05 * (rng.gen::<f64>() - 0.5),
                ]);
                y.push(label);
            }
        }
        (x, y)
    }

    #[test]
    fn xor_is_learned() {
        let (x, y) = xor_data();
        let model = train_mlp(&x, &y, 2, 16, 1000, 0).unwrap();
        let proba = model.predict_proba(&x);
        let hits = proba
            .iter()
            .zip(&y)
            .filter(|(row, &yi)| (row[1] > row[0]) == (yi == 1))
            .count();
        assert!(hits as f64 / y.len() as f64 >= 0.95);
        for row in &proba {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let shape = MlpShape {
            input: 3,
            hidden: 4,
            classes: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<usize> = (0..6).map(|i| i % 3).collect();
        for _ in 0..20 {
            let params: Vec<f64> = (0..shape.param_count())
                .map(|_| rng.gen::<f64>() - 0.5)
                .collect();
            let (_, grad) = loss_and_grad(&shape, &params, &x, &y);
            let h = 1e-6;
            for i in (0..params.len()).step_by(7) {
                let mut plus = params.clone();
                plus[i] += h;
                let mut minus = params.clone();
                minus[i] -= h;
                let fd = (loss_and_grad(&shape, &plus, &x, &y).0
                    - loss_and_grad(&shape, &minus, &x, &y).0)
                    / (2.0 * h);
                let denom = fd.abs().max(grad[i].abs()).max(1e-8);
                assert!(
                    (fd - grad[i]).abs() / denom < 1e-4,
                    "param {i}: {} vs {}",
                    grad[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn fixed_seed_reproduces_weights() {
        let (x, y) = xor_data();
        let a = train_mlp(&x, &y, 2, 8, 200, 4).unwrap();
        let b = train_mlp(&x, &y, 2, 8, 200, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, train_mlp(&x, &y, 2, 8, 200, 5).unwrap());
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train_mlp(&x, &[1, 1], 2, 4, 10, 0).is_err());
    }
}
