//! Loss functions with analytic gradients w.r.t. the prediction.
//!
//! `CrossEntropy` and `BinaryCrossEntropy` take raw scores (logits) as the
//! prediction; the softmax / sigmoid is folded into the loss.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tensor::{dot, norm, sigmoid};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Mse,
    CrossEntropy,
    Cosine,
    BinaryCrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    Values(&'a [f64]),
    Class(usize),
}

/// Smallest vector norm accepted by the cosine loss.
pub const COSINE_MIN_NORM: f64 = 1e-12;

pub fn loss_and_grad(kind: LossKind, prediction: &[f64], target: Target<'_>) -> Result<(f64, Vec<f64>)> {
    match (kind, target) {
        (LossKind::Mse, Target::Values(t)) => Ok(mse(prediction, t)?),
        (LossKind::Cosine, Target::Values(t)) => cosine(prediction, t),
        (LossKind::CrossEntropy, Target::Class(c)) => cross_entropy(prediction, c),
        (LossKind::BinaryCrossEntropy, Target::Values(t)) => {
            check_dim("binary cross-entropy", prediction.len(), t.len())?;
            let mut loss = 0.0;
            let mut grad = vec![0.0; t.len()];
            for ((g, &z), &y) in grad.iter_mut().zip(prediction).zip(t) {
                let (l, d) = binary_cross_entropy(z, y);
                loss += l;
                *g = d;
            }
            Ok((loss, grad))
        }
        (LossKind::BinaryCrossEntropy, Target::Class(c)) => {
            check_dim("binary cross-entropy", 1, prediction.len())?;
            let (l, d) = binary_cross_entropy(prediction[0], c as f64);
            Ok((l, vec![d]))
        }
        (LossKind::CrossEntropy, Target::Values(_)) => {
            Err(Error::Config("cross-entropy expects a class index target".into()))
        }
        (_, Target::Class(_)) => Err(Error::Config("loss expects a vector target".into())),
    }
}

fn mse(p: &[f64], t: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("mse", p.len(), t.len())?;
    if p.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = p.len() as f64;
    let loss = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let grad = p.iter().zip(t).map(|(a, b)| 2.0 * (a - b) / n).collect();
    Ok((loss, grad))
}

/// `1 − cos(p, t)`; the target is a constant.
fn cosine(p: &[f64], t: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("cosine", p.len(), t.len())?;
    let (np, nt) = (norm(p), norm(t));
    if np < COSINE_MIN_NORM || nt < COSINE_MIN_NORM {
        return Err(Error::DegenerateInput("zero-norm vector in cosine loss"));
    }
    let d = dot(p, t);
    let sim = d / (np * nt);
    let grad = p
        .iter()
        .zip(t)
        .map(|(&pi, &ti)| -(ti / (np * nt) - d * pi / (np * np * np * nt)))
        .collect();
    Ok((1.0 - sim, grad))
}

/// Numerically stable log-softmax cross-entropy.
fn cross_entropy(logits: &[f64], class: usize) -> Result<(f64, Vec<f64>)> {
    if class >= logits.len() {
        return Err(Error::Config(alloc::format!(
            "class index {class} out of range for {} logits",
            logits.len()
        )));
    }
    let probs = softmax(logits);
    let loss = -libm::log(probs[class].max(f64::MIN_POSITIVE));
    let mut grad = probs;
    grad[class] -= 1.0;
    Ok((loss, grad))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - m)).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Loss and gradient of binary cross-entropy on a logit `z` with target `y`.
pub fn binary_cross_entropy(z: f64, y: f64) -> (f64, f64) {
    let loss = z.max(0.0) - y * z + libm::log1p(libm::exp(-z.abs()));
    (loss, sigmoid(z) - y)
}
