//! Linear SVM trained with Pegasos-style stochastic subgradient descent.
//!
//! Minimises `lambda / 2 * |w|^2 + mean(max(0, 1 - y * (w.x + b)))` with
//! `y` in `{-1, +1}`. The bias is handled as the weight of a constant unit
//! feature, so it shares the step schedule `1 / (lambda * t)` and the
//! projection onto the ball of radius `1 / sqrt(lambda)`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::check_training_data;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::sparse::{FeatureMatrix, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: SvmParams,
    pub seed: u64,
}

impl LinearSvmModel {
    pub fn decision_score(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }
}

fn signed(l: Label) -> f64 {
    match l {
        Label::Plain => -1.0,
        Label::Obfuscated => 1.0,
    }
}

/// Hinge-loss subgradient for one sample with respect to `(w, b)`.
///
/// `None` when the margin `y * (w.x + b)` is at least 1: the sample then
/// contributes nothing and only the regulariser moves the weights.
pub fn hinge_subgradient(weights: &[f64], bias: f64, x: &FeatureVector, y: Label) -> Option<(FeatureVector, f64)> {
    let s = signed(y);
    if s * (x.dot(weights) + bias) >= 1.0 {
        None
    } else {
        Some((x.scaled(-s), -s))
    }
}

pub fn train_linear_svm(x: &FeatureMatrix, y: &[Label], params: &SvmParams, seed: u64) -> Result<LinearSvmModel> {
    check_training_data(x, y)?;
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::Config(format!(
            "svm lambda must be positive, got {}",
            params.lambda
        )));
    }
    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; x.dim()];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = seeded_rng(seed);
    let mut t = 0u64;

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - eta * lambda;
            let row = x.row(i);
            let s = signed(y[i]);
            let violated = s * (row.dot(&w) + b) < 1.0;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            b *= shrink;
            if violated {
                for (c, v) in row.iter() {
                    w[c] += eta * s * v;
                }
                b += eta * s;
            }
            let norm = (w.iter().map(|v| v * v).sum::<f64>() + b * b).sqrt();
            if norm > radius {
                let f = radius / norm;
                for wj in w.iter_mut() {
                    *wj *= f;
                }
                b *= f;
            }
        }
    }
    Ok(LinearSvmModel {
        weights: w,
        bias: b,
        params: *params,
        seed,
    })
}
