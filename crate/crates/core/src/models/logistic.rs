//! L2-regularised logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::check_training_data;
use crate::corpus::Label;
use crate::error::Result;
use crate::sparse::{FeatureMatrix, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: LogisticParams,
    pub seed: u64,
}

impl LogisticModel {
    pub fn decision_score(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn probability(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.decision_score(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// ln(1 + e^z) without overflow
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn target(l: Label) -> f64 {
    l.as_u8() as f64
}

/// Objective value and gradient at `(weights, bias)`.
///
/// The objective is the mean negative log-likelihood plus
/// `l2 / 2 * |weights|^2`; the bias is not penalised. Returns
/// `(loss, d_weights, d_bias)`.
pub fn loss_and_gradient(x: &FeatureMatrix, y: &[Label], weights: &[f64], bias: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.rows().iter().zip(y) {
        let z = row.dot(weights) + bias;
        let t = target(label);
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (c, v) in row.iter() {
            grad[c] += r * v;
        }
        grad_b += r;
    }
    loss /= n;
    grad_b /= n;
    let mut norm2 = 0.0;
    for (g, &w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        norm2 += w * w;
    }
    loss += 0.5 * l2 * norm2;
    (loss, grad, grad_b)
}

/// Zero-initialised full-batch gradient descent for a fixed epoch budget.
pub fn train_logistic(x: &FeatureMatrix, y: &[Label], params: &LogisticParams, seed: u64) -> Result<LogisticModel> {
    check_training_data(x, y)?;
    let mut weights = vec![0.0; x.dim()];
    let mut bias = 0.0;
    for _ in 0..params.epochs {
        let (_, grad, grad_b) = loss_and_gradient(x, y, &weights, bias, params.l2);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= params.learning_rate * g;
        }
        bias -= params.learning_rate * grad_b;
    }
    if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(crate::Error::Training(
            "logistic regression diverged; lower the learning rate".into(),
        ));
    }
    Ok(LogisticModel {
        weights,
        bias,
        params: *params,
        seed,
    })
}
