use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu, Dense};
use super::tensor::{sigmoid, Param, Parameterized};
use crate::error::{check_dim, Error, Result};

/// Feed-forward binary classifier: ReLU hidden layers with inverted dropout
/// and a single sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnParams {
    pub hidden: Vec<Dense>,
    pub output: Dense,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct FfnnCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    last: Vec<f64>,
    pub logit: f64,
}

impl FfnnParams {
    /// Hidden layers are Glorot-initialised; the output layer starts at zero
    /// so an untrained network predicts exactly 0.5.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        layers: &[usize],
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(alloc::format!(
                "dropout rate must lie in [0, 1), got {dropout}"
            )));
        }
        let mut hidden = Vec::with_capacity(layers.len());
        let mut prev = input_dim;
        for &width in layers {
            hidden.push(Dense::new(prev, width, rng));
            prev = width;
        }
        Ok(Self {
            hidden,
            output: Dense::zeros(prev, 1),
            dropout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map_or(self.output.input_dim(), Dense::input_dim)
    }

    pub fn forward_cached<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        training: bool,
        rng: &mut R,
    ) -> Result<FfnnCache> {
        check_dim("ffnn input", self.input_dim(), input.len())?;
        let keep = 1.0 - self.dropout;
        let mut inputs = Vec::with_capacity(self.hidden.len());
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut masks = Vec::with_capacity(self.hidden.len());
        let mut x = input.to_vec();
        for layer in &self.hidden {
            let z = layer.forward(&x)?;
            let mut a: Vec<f64> = z.iter().map(|&v| relu(v)).collect();
            let mask = if training && self.dropout > 0.0 {
                let m: Vec<f64> = a
                    .iter()
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                a.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                Some(m)
            } else {
                None
            };
            inputs.push(x);
            pre.push(z);
            masks.push(mask);
            x = a;
        }
        let logit = self.output.forward(&x)?[0];
        Ok(FfnnCache {
            inputs,
            pre,
            masks,
            last: x,
            logit,
        })
    }

    /// Probability from the sigmoid head.
    pub fn forward<R: Rng + ?Sized>(&self, input: &[f64], training: bool, rng: &mut R) -> Result<f64> {
        Ok(sigmoid(self.forward_cached(input, training, rng)?.logit))
    }

    /// Inference-mode forward pass (no dropout, no randomness).
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        self.forward(input, false, &mut NoRng)
    }

    /// Backpropagates `∂L/∂logit`; returns `∂L/∂input`.
    pub fn backward(&mut self, cache: &FfnnCache, dlogit: f64) -> Vec<f64> {
        let mut d = self.output.backward(&cache.last, &[dlogit]);
        for (i, layer) in self.hidden.iter_mut().enumerate().rev() {
            if let Some(mask) = &cache.masks[i] {
                d.iter_mut().zip(mask).for_each(|(v, s)| *v *= s);
            }
            for (v, z) in d.iter_mut().zip(&cache.pre[i]) {
                if *z <= 0.0 {
                    *v = 0.0;
                }
            }
            d = layer.backward(&cache.inputs[i], &d);
        }
        d
    }
}

impl Parameterized for FfnnParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for layer in &mut self.hidden {
            layer.visit_params(f);
        }
        self.output.visit_params(f);
    }
}

/// Generator that is never consulted; used for inference-mode passes.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference does not draw random numbers")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("inference does not draw random numbers")
    }
    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("inference does not draw random numbers")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_predicts_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = FfnnParams::new(5, &[4, 3], 0.2, &mut rng).unwrap();
        net.visit_params(&mut |p| p.value.fill(0.0));
        assert_eq!(net.predict(&[3.0, -1.0, 2.0, 0.5, 9.0]).unwrap(), 0.5);
    }

    #[test]
    fn no_dropout_train_equals_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = FfnnParams::new(4, &[6, 3], 0.0, &mut rng).unwrap();
        net.output.weight.value = Tensor2::glorot(1, 3, &mut rng);
        let x = [0.3, -0.7, 1.1, 0.2];
        let a = net.forward(&x, true, &mut rng).unwrap();
        let b = net.predict(&x).unwrap();
        assert_eq!(a, b);
    }

    // Independent evaluation: explicit loops over the weight layout.
    fn oracle(net: &FfnnParams, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        for layer in &net.hidden {
            let w = &layer.weight.value;
            let mut next = vec![0.0; w.rows()];
            for r in 0..w.rows() {
                let mut s = layer.bias.value.data()[r];
                for c in 0..w.cols() {
                    s += w.get(r, c) * cur[c];
                }
                next[r] = if s > 0.0 { s } else { 0.0 };
            }
            cur = next;
        }
        let w = &net.output.weight.value;
        let mut z = net.output.bias.value.data()[0];
        for c in 0..w.cols() {
            z += w.get(0, c) * cur[c];
        }
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn matches_layer_by_layer_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut net = FfnnParams::new(6, &[5, 4, 3], 0.2, &mut rng).unwrap();
            net.output.weight.value = Tensor2::glorot(1, 3, &mut rng);
            net.visit_params(&mut |p| {
                if p.value.rows() == 1 {
                    for v in p.value.data_mut() {
                        *v += 0.1;
                    }
                }
            });
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = net.predict(&x).unwrap();
            assert!((got - oracle(&net, &x)).abs() < 1e-12);
            assert!(got > 0.0 && got < 1.0);
        }
    }

    #[test]
    fn rejects_wrong_input_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = FfnnParams::new(5, &[4], 0.0, &mut rng).unwrap();
        assert!(net.predict(&[1.0; 4]).is_err());
    }

    #[test]
    fn rejects_bad_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(FfnnParams::new(5, &[4], 1.0, &mut rng).is_err());
    }
}
