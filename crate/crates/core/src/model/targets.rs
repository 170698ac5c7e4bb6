//! Next-event prediction targets and their losses.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::encoder::{Encoder, TIME_FEATURES};
use crate::error::Result;
use crate::event::{time, Event};
use crate::nn::loss::{softmax, COSINE_MIN_NORM};
use crate::nn::tensor::norm;
use crate::nn::{loss_and_grad, LossKind, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetFeature {
    /// Pooled embedding of a destination field (cosine).
    Destination(usize),
    /// Calendar features (mse).
    Time,
    /// One standardised numeric field (mse).
    Numeric(usize),
    /// One categorical field (cross-entropy).
    Categorical(usize),
    /// Pooled word vectors of one text field (cosine).
    Text(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSlot {
    pub feature: TargetFeature,
    pub offset: usize,
    pub len: usize,
}

/// Where each predicted feature sits in the head output. The source entity
/// is not predicted: it is constant along a user's sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetLayout {
    pub slots: Vec<TargetSlot>,
    pub len: usize,
}

impl TargetLayout {
    pub fn new(encoder: &Encoder) -> Self {
        let l = &encoder.layout;
        let mut slots = Vec::new();
        let mut len = 0;
        let mut push = |feature, n: usize| {
            slots.push(TargetSlot {
                feature,
                offset: len,
                len: n,
            });
            len += n;
        };
        for f in 0..l.destination_spaces.len() {
            push(TargetFeature::Destination(f), l.destination_dim(f));
        }
        push(TargetFeature::Time, TIME_FEATURES);
        for i in 0..l.numerics {
            push(TargetFeature::Numeric(i), 1);
        }
        for (i, &n) in l.categorical_sizes.iter().enumerate() {
            push(TargetFeature::Categorical(i), n);
        }
        if l.text_dim > 0 {
            for i in 0..l.texts {
                push(TargetFeature::Text(i), l.text_dim);
            }
        }
        Self { slots, len }
    }

    pub fn feature_count(&self) -> usize {
        self.slots.len()
    }
}

enum Observed {
    Vector(Vec<f64>, LossKind),
    Class(usize),
}

/// The observed value of a feature, or `None` when it cannot be scored
/// (an empty receiver field or empty text pools to the zero vector).
fn observed(encoder: &Encoder, event: &Event, feature: TargetFeature) -> Option<Observed> {
    let cosine = |v: Vec<f64>| (norm(&v) >= COSINE_MIN_NORM).then_some(Observed::Vector(v, LossKind::Cosine));
    match feature {
        TargetFeature::Destination(f) => cosine(encoder.destination_vector(event, f)),
        TargetFeature::Time => Some(Observed::Vector(time::encode_time(event.timestamp).to_vec(), LossKind::Mse)),
        TargetFeature::Numeric(i) => Some(Observed::Vector(vec![event.numerics[i]], LossKind::Mse)),
        TargetFeature::Categorical(i) => Some(Observed::Class(event.categoricals[i] as usize)),
        TargetFeature::Text(i) => cosine(event.texts[i].clone()),
    }
}

/// Mixed next-event loss: the mean over scorable features of each feature's
/// loss. Returns the loss and its gradient with respect to `prediction`.
pub fn next_event_loss(
    layout: &TargetLayout,
    encoder: &Encoder,
    prediction: &[f64],
    next: &Event,
) -> Result<(f64, Vec<f64>)> {
    crate::error::check_dim("head output", layout.len, prediction.len())?;
    let mut grad = vec![0.0; layout.len];
    let mut parts = Vec::with_capacity(layout.slots.len());
    for slot in &layout.slots {
        let p = &prediction[slot.offset..slot.offset + slot.len];
        let Some(obs) = observed(encoder, next, slot.feature) else { continue };
        let (kind, target) = match &obs {
            Observed::Vector(v, kind) => (*kind, Target::Values(v)),
            Observed::Class(c) => (LossKind::CrossEntropy, Target::Class(*c)),
        };
        if kind == LossKind::Cosine && norm(p) < COSINE_MIN_NORM {
            continue;
        }
        let (l, g) = loss_and_grad(kind, p, target)?;
        parts.push((slot, l, g));
    }
    if parts.is_empty() {
        return Ok((0.0, grad));
    }
    let w = 1.0 / parts.len() as f64;
    let mut loss = 0.0;
    for (slot, l, g) in parts {
        loss += w * l;
        for (o, v) in grad[slot.offset..slot.offset + slot.len].iter_mut().zip(g) {
            *o = w * v;
        }
    }
    Ok((loss, grad))
}

/// Per-feature prediction errors used for quantile scoring: mean squared
/// error for time and numerics, `1 − p(true class)` for categoricals and
/// cosine distance for embeddings. Unscorable features are `None`.
pub fn feature_errors(layout: &TargetLayout, encoder: &Encoder, prediction: &[f64], event: &Event) -> Vec<Option<f64>> {
    layout
        .slots
        .iter()
        .map(|slot| {
            let p = &prediction[slot.offset..slot.offset + slot.len];
            Some(match observed(encoder, event, slot.feature)? {
                Observed::Class(c) => categorical_error(p, c),
                Observed::Vector(v, LossKind::Cosine) => {
                    if norm(p) < COSINE_MIN_NORM {
                        1.0
                    } else {
                        loss_and_grad(LossKind::Cosine, p, Target::Values(&v)).ok()?.0
                    }
                }
                Observed::Vector(v, _) => squared_error(p, &v),
            })
        })
        .collect()
}

pub fn squared_error(prediction: &[f64], observed: &[f64]) -> f64 {
    let n = prediction.len().max(1) as f64;
    prediction.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum::<f64>() / n
}

/// `1 − softmax(logits)[class]`; an out-of-range class counts as fully wrong.
pub fn categorical_error(logits: &[f64], class: usize) -> f64 {
    softmax(logits).get(class).map_or(1.0, |p| 1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Label;
    use crate::model::encoder::EventLayout;
    use alloc::string::String;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoder(cats: Vec<usize>) -> Encoder {
        let layout = EventLayout {
            space_dims: vec![2, 3],
            space_sizes: vec![3, 4],
            source_space: 0,
            destination_spaces: vec![1],
            numerics: 1,
            categorical_sizes: cats,
            texts: 0,
            text_dim: 0,
        };
        Encoder::new(layout, &mut ChaCha8Rng::seed_from_u64(9))
    }

    fn event() -> Event {
        Event {
            key: 0,
            timestamp: 3600,
            user: String::new(),
            source: 1,
            destinations: vec![vec![2]],
            numerics: vec![0.5],
            categoricals: vec![1],
            texts: vec![],
            label: Label::Normal,
        }
    }

    #[test]
    fn slots_follow_schema() {
        let t = TargetLayout::new(&encoder(vec![3]));
        let kinds: Vec<_> = t.slots.iter().map(|s| (s.feature, s.len)).collect();
        assert_eq!(
            kinds,
            vec![
                (TargetFeature::Destination(0), 3),
                (TargetFeature::Time, 4),
                (TargetFeature::Numeric(0), 1),
                (TargetFeature::Categorical(0), 3),
            ]
        );
        assert_eq!(t.len, 11);
    }

    #[test]
    fn categorical_errors() {
        assert!((categorical_error(&[0.0, 0.0], 0) - 0.5).abs() < 1e-15);
        let e2 = 2f64.exp();
        let expect = 1.0 - e2 / (e2 + 2.0);
        assert!((categorical_error(&[2.0, 0.0, 0.0], 0) - expect).abs() < 1e-12);
        // 2 / (e² + 2)
        assert!((expect - 0.213_014).abs() < 1e-6);
    }

    #[test]
    fn perfect_numeric_prediction_has_zero_error() {
        assert_eq!(squared_error(&[2.0], &[2.0]), 0.0);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let enc = encoder(vec![3]);
        let t = TargetLayout::new(&enc);
        let ev = event();
        let pred: Vec<f64> = (0..t.len).map(|i| 0.3 * (i as f64 + 1.0).sin()).collect();
        let (_, g) = next_event_loss(&t, &enc, &pred, &ev).unwrap();
        for i in 0..t.len {
            let mut a = pred.clone();
            let mut b = pred.clone();
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let num = (next_event_loss(&t, &enc, &a, &ev).unwrap().0 - next_event_loss(&t, &enc, &b, &ev).unwrap().0) / 2e-6;
            assert!((num - g[i]).abs() < 1e-7, "{i}: {num} vs {}", g[i]);
        }
    }

    #[test]
    fn empty_receiver_field_is_masked() {
        let enc = encoder(vec![3]);
        let t = TargetLayout::new(&enc);
        let mut ev = event();
        ev.destinations = vec![vec![]];
        let pred = vec![0.1; t.len];
        let (_, g) = next_event_loss(&t, &enc, &pred, &ev).unwrap();
        assert!(g[..3].iter().all(|&v| v == 0.0));
        assert_eq!(feature_errors(&t, &enc, &pred, &ev)[0], None);
    }

    #[test]
    fn time_only_target_has_four_values() {
        let enc = encoder(vec![]);
        let t = TargetLayout::new(&enc);
        let time = t.slots.iter().find(|s| s.feature == TargetFeature::Time).unwrap();
        assert_eq!(time.len, 4);
    }
}
