//! Central finite-difference verification of analytic gradients.
//!
//! Every check perturbs each scalar parameter by `±FD_STEP`, re-runs the
//! forward pass only, and compares the slope with the gradient produced by
//! the layer's backward pass.

use alloc::vec::Vec;

use rand::Rng;

use super::ffnn::FfnnParams;
use super::layers::{Dense, Embedding};
use super::loss::{loss_and_grad, LossKind, Target};
use super::lstm::{LstmParams, LstmState};
use super::tensor::{Param, Parameterized, Tensor2};

pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub name: &'static str,
    pub max_relative_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }

    fn merge(mut self, other: GradCheckReport) -> Self {
        self.max_relative_error = self.max_relative_error.max(other.max_relative_error);
        self.checked += other.checked;
        self
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares the gradients accumulated in `model` by `backward` with central
/// differences of `loss`.
pub fn check_params<M: Parameterized>(
    name: &'static str,
    model: &mut M,
    loss: impl Fn(&M) -> f64,
    backward: impl FnOnce(&mut M),
) -> GradCheckReport {
    model.zero_grad();
    backward(model);
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    model.visit_params(&mut |p| analytic.push(p.value_and_grad().1.data().to_vec()));

    let mut max_err: f64 = 0.0;
    let mut checked = 0;
    for (pi, grads) in analytic.iter().enumerate() {
        for (k, &a) in grads.iter().enumerate() {
            let orig = nth_value(model, pi, k, None);
            nth_value(model, pi, k, Some(orig + FD_STEP));
            let up = loss(model);
            nth_value(model, pi, k, Some(orig - FD_STEP));
            let down = loss(model);
            nth_value(model, pi, k, Some(orig));
            let numeric = (up - down) / (2.0 * FD_STEP);
            max_err = max_err.max(relative_error(a, numeric));
            checked += 1;
        }
    }
    GradCheckReport {
        name,
        max_relative_error: max_err,
        checked,
    }
}

fn nth_value<M: Parameterized>(model: &mut M, param: usize, k: usize, set: Option<f64>) -> f64 {
    let mut i = 0;
    let mut out = 0.0;
    model.visit_params(&mut |p: &mut Param| {
        if i == param {
            let d = p.value.data_mut();
            if let Some(v) = set {
                d[k] = v;
            }
            out = d[k];
        }
        i += 1;
    });
    out
}

/// Central-difference check of an input gradient.
pub fn check_inputs(
    name: &'static str,
    x: &[f64],
    loss: impl Fn(&[f64]) -> f64,
    analytic: &[f64],
) -> GradCheckReport {
    let mut xs = x.to_vec();
    let mut max_err: f64 = 0.0;
    for k in 0..xs.len() {
        let orig = xs[k];
        xs[k] = orig + FD_STEP;
        let up = loss(&xs);
        xs[k] = orig - FD_STEP;
        let down = loss(&xs);
        xs[k] = orig;
        max_err = max_err.max(relative_error(analytic[k], (up - down) / (2.0 * FD_STEP)));
    }
    GradCheckReport {
        name,
        max_relative_error: max_err,
        checked: xs.len(),
    }
}

fn random_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn randomize_biases<M: Parameterized, R: Rng + ?Sized>(m: &mut M, rng: &mut R) {
    m.visit_params(&mut |p| {
        if p.value.rows() == 1 {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    });
}

/// Dense layer (5×4 weights) under mean squared error.
pub fn check_dense<R: Rng + ?Sized>(rng: &mut R) -> GradCheckReport {
    let mut layer = Dense::new(4, 5, rng);
    randomize_biases(&mut layer, rng);
    let x = random_vec(4, rng);
    let t = random_vec(5, rng);
    let loss = |l: &Dense, x: &[f64]| {
        let y = l.forward(x).expect("dims");
        loss_and_grad(LossKind::Mse, &y, Target::Values(&t)).expect("dims").0
    };
    let params = check_params("dense+mse", &mut layer, |l| loss(l, &x), |l| {
        let y = l.forward(&x).expect("dims");
        let (_, dy) = loss_and_grad(LossKind::Mse, &y, Target::Values(&t)).expect("dims");
        l.backward(&x, &dy);
    });
    let mut scratch = layer.clone();
    let y = layer.forward(&x).expect("dims");
    let (_, dy) = loss_and_grad(LossKind::Mse, &y, Target::Values(&t)).expect("dims");
    let dx = scratch.backward(&x, &dy);
    params.merge(check_inputs("dense+mse", &x, |x| loss(&layer, x), &dx))
}

/// Embedding lookup under cosine loss.
pub fn check_embedding<R: Rng + ?Sized>(rng: &mut R) -> GradCheckReport {
    let mut emb = Embedding::new(6, 4, rng);
    let idx = rng.random_range(0..6u32);
    let t = random_vec(4, rng);
    check_params(
        "embedding+cosine",
        &mut emb,
        |e| loss_and_grad(LossKind::Cosine, e.lookup(idx), Target::Values(&t)).expect("nonzero").0,
        |e| {
            let (_, dy) = loss_and_grad(LossKind::Cosine, e.lookup(idx), Target::Values(&t)).expect("nonzero");
            e.backward_lookup(idx, &dy);
        },
    )
}

/// Embedding bag (average pooling, repeated indices allowed) under MSE.
pub fn check_embedding_bag<R: Rng + ?Sized>(rng: &mut R) -> GradCheckReport {
    let mut emb = Embedding::new(7, 3, rng);
    let n = rng.random_range(1..5);
    let idx: Vec<u32> = (0..n).map(|_| rng.random_range(0..7u32)).collect();
    let t = random_vec(3, rng);
    check_params(
        "embedding_bag+mse",
        &mut emb,
        |e| loss_and_grad(LossKind::Mse, &e.bag(&idx), Target::Values(&t)).expect("dims").0,
        |e| {
            let (_, dy) = loss_and_grad(LossKind::Mse, &e.bag(&idx), Target::Values(&t)).expect("dims");
            e.backward_bag(&idx, &dy);
        },
    )
}

/// LSTM unrolled over three steps; cross-entropy on the final hidden state.
pub fn check_lstm<R: Rng + ?Sized>(rng: &mut R) -> GradCheckReport {
    let (input, hidden) = (3, 4);
    let mut lstm = LstmParams::new(input, hidden, rng);
    randomize_biases(&mut lstm, rng);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(input, rng)).collect();
    let start = LstmState {
        h: random_vec(hidden, rng),
        c: random_vec(hidden, rng),
    };
    let class = rng.random_range(0..hidden);
    // Scale logits so the softmax is not saturated nor flat.
    let scale = 3.0;
    let loss_of = |l: &LstmParams, xs: &[Vec<f64>]| {
        let (end, _) = l.forward_window(xs, &start).expect("dims");
        let logits: Vec<f64> = end.h.iter().map(|v| v * scale).collect();
        loss_and_grad(LossKind::CrossEntropy, &logits, Target::Class(class)).expect("class").0
    };
    let backward = |l: &mut LstmParams| {
        let (end, caches) = l.forward_window(&xs, &start).expect("dims");
        let logits: Vec<f64> = end.h.iter().map(|v| v * scale).collect();
        let (_, d) = loss_and_grad(LossKind::CrossEntropy, &logits, Target::Class(class)).expect("class");
        let dh: Vec<f64> = d.iter().map(|v| v * scale).collect();
        l.backward_window(&caches, &dh)
    };
    let report = check_params("lstm3+cross_entropy", &mut lstm, |l| loss_of(l, &xs), |l| {
        backward(l);
    });
    let mut scratch = lstm.clone();
    let dxs = backward(&mut scratch);
    let flat: Vec<f64> = xs.iter().flatten().copied().collect();
    let dflat: Vec<f64> = dxs.iter().flatten().copied().collect();
    let inputs = check_inputs(
        "lstm3+cross_entropy",
        &flat,
        |f| {
            let xs: Vec<Vec<f64>> = f.chunks(input).map(<[f64]>::to_vec).collect();
            loss_of(&lstm, &xs)
        },
        &dflat,
    );
    report.merge(inputs)
}

/// Feed-forward classifier (dropout disabled) under binary cross-entropy.
pub fn check_ffnn<R: Rng + ?Sized>(rng: &mut R) -> GradCheckReport {
    let mut net = FfnnParams::new(5, &[6, 4, 3], 0.0, rng).expect("valid dropout");
    net.output.weight.value = Tensor2::glorot(1, 3, rng);
    randomize_biases(&mut net, rng);
    let x = random_vec(5, rng);
    let y = if rng.random::<bool>() { 1.0 } else { 0.0 };
    let loss = |n: &FfnnParams, x: &[f64]| {
        let z = n.forward_cached(x, false, &mut NullRng).expect("dims").logit;
        loss_and_grad(LossKind::BinaryCrossEntropy, &[z], Target::Values(&[y])).expect("dims").0
    };
    let backward = |n: &mut FfnnParams| {
        let cache = n.forward_cached(&x, false, &mut NullRng).expect("dims");
        let (_, d) = loss_and_grad(LossKind::BinaryCrossEntropy, &[cache.logit], Target::Values(&[y])).expect("dims");
        n.backward(&cache, d[0])
    };
    let report = check_params("ffnn+binary_cross_entropy", &mut net, |n| loss(n, &x), |n| {
        backward(n);
    });
    let mut scratch = net.clone();
    let dx = backward(&mut scratch);
    report.merge(check_inputs("ffnn+binary_cross_entropy", &x, |x| loss(&net, x), &dx))
}

/// Input gradient of one loss function at a random point.
pub fn check_loss<R: Rng + ?Sized>(kind: LossKind, rng: &mut R) -> GradCheckReport {
    let n = rng.random_range(2..6);
    let p = random_vec(n, rng);
    let name = match kind {
        LossKind::Mse => "loss:mse",
        LossKind::CrossEntropy => "loss:cross_entropy",
        LossKind::Cosine => "loss:cosine",
        LossKind::BinaryCrossEntropy => "loss:binary_cross_entropy",
    };
    let values = random_vec(n, rng);
    let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let class = rng.random_range(0..n);
    let target = match kind {
        LossKind::Mse | LossKind::Cosine => Target::Values(&values),
        LossKind::CrossEntropy => Target::Class(class),
        LossKind::BinaryCrossEntropy => Target::Values(&probs),
    };
    let f = |x: &[f64]| loss_and_grad(kind, x, target).expect("valid target").0;
    let (_, g) = loss_and_grad(kind, &p, target).expect("valid target");
    check_inputs(name, &p, f, &g)
}

/// Every layer and loss, `configs` random configurations each; one merged
/// report per component.
pub fn run_suite<R: Rng + ?Sized>(configs: usize, rng: &mut R) -> Vec<GradCheckReport> {
    type Check<R> = fn(&mut R) -> GradCheckReport;
    let layers: [Check<R>; 5] = [check_dense, check_embedding, check_embedding_bag, check_lstm, check_ffnn];
    let mut out = Vec::new();
    for check in layers {
        let mut merged = check(rng);
        for _ in 1..configs {
            merged = merged.merge(check(rng));
        }
        out.push(merged);
    }
    for kind in [
        LossKind::Mse,
        LossKind::CrossEntropy,
        LossKind::Cosine,
        LossKind::BinaryCrossEntropy,
    ] {
        let mut merged = check_loss(kind, rng);
        for _ in 1..configs {
            merged = merged.merge(check_loss(kind, rng));
        }
        out.push(merged);
    }
    out
}

struct NullRng;

impl rand::RngCore for NullRng {
    fn next_u32(&mut self) -> u32 {
        0
    }
    fn next_u64(&mut self) -> u64 {
        0
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn detects_a_wrong_gradient() {
        let mut d = Dense::zeros(2, 1);
        d.weight.value.data_mut().copy_from_slice(&[1.0, 2.0]);
        let x = [0.5, 0.25];
        let r = check_params(
            "broken",
            &mut d,
            |l| l.forward(&x).unwrap()[0].powi(2),
            |l| {
                // Deliberately off by a factor of two.
                let y = l.forward(&x).unwrap()[0];
                l.backward(&x, &[4.0 * y]);
            },
        );
        assert!(!r.passes(1e-4));
    }

    #[test]
    fn suite_passes_for_one_configuration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in run_suite(1, &mut rng) {
            assert!(r.passes(1e-4), "{}: {}", r.name, r.max_relative_error);
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 0.0) < 1e-5);
    }
}
