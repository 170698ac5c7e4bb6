//! Single-layer LSTM with truncated backpropagation through time.
//!
//! Gate pre-activations are stacked as `[input, forget, candidate, output]`,
//! each block `hidden_dim` rows tall.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, Param, Parameterized, Tensor2};
use crate::error::{check_dim, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_input: Param,
    pub w_hidden: Param,
    pub bias: Param,
}

/// Hidden and cell state of one recurrent sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| *v == 0.0)
    }
}

/// Activations kept from one forward step for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Self {
            w_input: Param::new(Tensor2::glorot(4 * hidden_dim, input_dim, rng)),
            w_hidden: Param::new(Tensor2::glorot(4 * hidden_dim, hidden_dim, rng)),
            bias: Param::new(Tensor2::zeros(1, 4 * hidden_dim)),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_input: Param::new(Tensor2::zeros(4 * hidden_dim, input_dim)),
            w_hidden: Param::new(Tensor2::zeros(4 * hidden_dim, hidden_dim)),
            bias: Param::new(Tensor2::zeros(1, 4 * hidden_dim)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.value.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.value.cols()
    }

    fn gates(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hd = self.hidden_dim();
        let mut z = self.bias.value.data().to_vec();
        self.w_input.value.matvec_acc(x, &mut z);
        self.w_hidden.value.matvec_acc(h, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * hd..3 * hd).contains(&k) {
                libm::tanh(*v)
            } else {
                sigmoid(*v)
            };
        }
        z
    }

    fn check(&self, x: &[f64], state: &LstmState) -> Result<()> {
        check_dim("lstm input", self.input_dim(), x.len())?;
        check_dim("lstm hidden state", self.hidden_dim(), state.h.len())?;
        check_dim("lstm cell state", self.hidden_dim(), state.c.len())
    }

    /// One LSTM step without keeping activations.
    pub fn step(&self, x: &[f64], state: &LstmState) -> Result<LstmState> {
        self.check(x, state)?;
        let gates = self.gates(x, &state.h);
        let (next, _) = combine(&gates, &state.c);
        Ok(next)
    }

    /// One LSTM step returning the cache needed by [`LstmParams::backward_step`].
    pub fn step_cached(&self, x: &[f64], state: &LstmState) -> Result<(LstmState, LstmCache)> {
        self.check(x, state)?;
        let gates = self.gates(x, &state.h);
        let (next, tanh_c) = combine(&gates, &state.c);
        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates,
            tanh_c,
        };
        Ok((next, cache))
    }

    /// Backward through one step. Takes gradients flowing into `h'` and `c'`,
    /// accumulates parameter gradients and returns `(dx, dh, dc)`.
    pub fn backward_step(
        &mut self,
        cache: &LstmCache,
        dh_next: &[f64],
        dc_next: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim();
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, cand, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
            let tc = cache.tanh_c[k];
            let dc = dc_next[k] + dh_next[k] * o * (1.0 - tc * tc);
            dz[k] = dc * cand * i * (1.0 - i);
            dz[hd + k] = dc * cache.c_prev[k] * f * (1.0 - f);
            dz[2 * hd + k] = dc * i * (1.0 - cand * cand);
            dz[3 * hd + k] = dh_next[k] * tc * o * (1.0 - o);
            dc_prev[k] = dc * f;
        }
        self.w_input.grad_mut().outer_acc(&dz, &cache.x);
        self.w_hidden.grad_mut().outer_acc(&dz, &cache.h_prev);
        super::tensor::axpy(1.0, &dz, self.bias.grad_mut().data_mut());
        let mut dx = vec![0.0; cache.x.len()];
        self.w_input.value.matvec_t_acc(&dz, &mut dx);
        let mut dh_prev = vec![0.0; hd];
        self.w_hidden.value.matvec_t_acc(&dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }

    /// Runs a window of inputs from `state`, keeping caches for BPTT.
    pub fn forward_window(
        &self,
        inputs: &[Vec<f64>],
        state: &LstmState,
    ) -> Result<(LstmState, Vec<LstmCache>)> {
        let mut caches = Vec::with_capacity(inputs.len());
        let mut cur = state.clone();
        for x in inputs {
            let (next, cache) = self.step_cached(x, &cur)?;
            caches.push(cache);
            cur = next;
        }
        Ok((cur, caches))
    }

    /// Truncated BPTT over a window given `∂L/∂h` at its last step.
    /// Returns the input gradient of every step.
    pub fn backward_window(&mut self, caches: &[LstmCache], dh_last: &[f64]) -> Vec<Vec<f64>> {
        let hd = self.hidden_dim();
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; hd];
        let mut dxs = vec![Vec::new(); caches.len()];
        for (t, cache) in caches.iter().enumerate().rev() {
            let (dx, dh_prev, dc_prev) = self.backward_step(cache, &dh, &dc);
            dxs[t] = dx;
            dh = dh_prev;
            dc = dc_prev;
        }
        dxs
    }
}

fn combine(gates: &[f64], c_prev: &[f64]) -> (LstmState, Vec<f64>) {
    let hd = c_prev.len();
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    for k in 0..hd {
        let (i, f, cand, o) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
        c[k] = f * c_prev[k] + i * cand;
        tanh_c[k] = libm::tanh(c[k]);
        h[k] = o * tanh_c[k];
    }
    (LstmState { h, c }, tanh_c)
}

impl Parameterized for LstmParams {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.w_input);
        f(&mut self.w_hidden);
        f(&mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_everything_stays_zero() {
        let p = LstmParams::zeros(3, 2);
        let s = p.step(&[0.0; 3], &LstmState::zeros(2)).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn unit_cell_halves_with_zero_weights() {
        let p = LstmParams::zeros(1, 1);
        let s = p
            .step(
                &[0.0],
                &LstmState {
                    h: vec![0.0],
                    c: vec![1.0],
                },
            )
            .unwrap();
        assert_eq!(s.c, vec![0.5]);
        assert!((s.h[0] - 0.231_058_6).abs() < 1e-6);
    }

    // Scalar oracle written straight from the gate equations.
    fn scalar_lstm(w: &[f64; 4], u: &[f64; 4], b: &[f64; 4], x: f64, h: f64, c: f64) -> (f64, f64) {
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = s(w[0] * x + u[0] * h + b[0]);
        let f = s(w[1] * x + u[1] * h + b[1]);
        let g = (w[2] * x + u[2] * h + b[2]).tanh();
        let o = s(w[3] * x + u[3] * h + b[3]);
        let c2 = f * c + i * g;
        (o * c2.tanh(), c2)
    }

    #[test]
    fn single_unit_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let p = LstmParams::new(1, 1, &mut rng);
            let mut p = p;
            for v in p.bias.value.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let col = |t: &Tensor2| [t.get(0, 0), t.get(1, 0), t.get(2, 0), t.get(3, 0)];
            let w = col(&p.w_input.value);
            let u = col(&p.w_hidden.value);
            let b = col(&Tensor2::from_vec(4, 1, p.bias.value.data().to_vec()).unwrap());
            let (x, h, c) = (
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let (eh, ec) = scalar_lstm(&w, &u, &b, x, h, c);
            let s = p
                .step(
                    &[x],
                    &LstmState {
                        h: vec![h],
                        c: vec![c],
                    },
                )
                .unwrap();
            assert!((s.h[0] - eh).abs() < 1e-12);
            assert!((s.c[0] - ec).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = LstmParams::zeros(3, 2);
        assert!(p.step(&[0.0; 2], &LstmState::zeros(2)).is_err());
        assert!(p.step(&[0.0; 3], &LstmState::zeros(3)).is_err());
    }
}
