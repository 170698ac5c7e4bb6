use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tensor::{Parameterized, Tensor2};
use crate::error::{Error, Result};

/// Adam with global-norm gradient clipping and a plateau learning-rate decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub decay_factor: f64,
    /// Non-improving epochs tolerated before the rate is decayed.
    pub patience: usize,
    pub epochs_without_improvement: usize,
    pub best_epoch_loss: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: Option<f64>,
    pub step: u64,
    moments: Vec<(Tensor2, Tensor2)>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            decay_factor: 0.5,
            patience: 1,
            epochs_without_improvement: 0,
            best_epoch_loss: f64::INFINITY,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn with_clip_norm(mut self, clip: Option<f64>) -> Self {
        self.clip_norm = clip;
        self
    }

    pub fn with_decay(mut self, decay_factor: f64, patience: usize) -> Self {
        self.decay_factor = decay_factor;
        self.patience = patience;
        self
    }

    /// Applies one update from the gradients accumulated in `model`.
    /// Gradients are left untouched; callers zero them before the next pass.
    pub fn step(&mut self, model: &mut dyn Parameterized) -> Result<()> {
        let mut sq = 0.0;
        let mut idx = 0usize;
        let mut bad = None;
        model.visit_params(&mut |p| {
            let (_, g) = p.value_and_grad();
            for v in g.data() {
                if !v.is_finite() && bad.is_none() {
                    bad = Some(idx);
                }
                sq += v * v;
            }
            idx += 1;
        });
        if let Some(i) = bad {
            return Err(Error::NonFiniteGradient(i));
        }
        let gnorm = libm::sqrt(sq);
        let scale = match self.clip_norm {
            Some(c) if gnorm > c => c / gnorm,
            _ => 1.0,
        };

        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let c1 = 1.0 - libm::pow(b1, t as f64);
        let c2 = 1.0 - libm::pow(b2, t as f64);
        let moments = &mut self.moments;
        let mut i = 0usize;
        model.visit_params(&mut |p| {
            let (value, grad) = p.value_and_grad();
            if moments.len() <= i {
                moments.push((
                    Tensor2::zeros(value.rows(), value.cols()),
                    Tensor2::zeros(value.rows(), value.cols()),
                ));
            }
            let (m, v) = &mut moments[i];
            for (((w, &g), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = g * scale;
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= lr * mhat / (libm::sqrt(vhat) + eps);
            }
            i += 1;
        });
        Ok(())
    }

    /// Records an epoch's mean loss; decays the rate after `patience` epochs
    /// without a strict improvement. Returns whether a decay happened.
    pub fn end_epoch(&mut self, loss: f64) -> bool {
        if loss < self.best_epoch_loss {
            self.best_epoch_loss = loss;
            self.epochs_without_improvement = 0;
            return false;
        }
        self.epochs_without_improvement += 1;
        if self.epochs_without_improvement >= self.patience {
            self.learning_rate *= self.decay_factor;
            self.epochs_without_improvement = 0;
            true
        } else {
            false
        }
    }
}
