use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, Param, Parameterized, Tensor2};
use crate::error::{check_dim, Result};

/// Fully connected layer `y = W x + b`, with `W` shaped `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::new(Tensor2::glorot(output, input, rng)),
            bias: Param::new(Tensor2::zeros(1, output)),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Param::new(Tensor2::zeros(output, input)),
            bias: Param::new(Tensor2::zeros(1, output)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("dense input", self.input_dim(), x.len())?;
        let mut y = self.bias.value.data().to_vec();
        self.weight.value.matvec_acc(x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `∂L/∂x`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        axpy(1.0, dy, self.bias.grad_mut().data_mut());
        self.weight.grad_mut().outer_acc(dy, x);
        let mut dx = vec![0.0; x.len()];
        self.weight.value.matvec_t_acc(dy, &mut dx);
        dx
    }
}

impl Parameterized for Dense {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Embedding table; row 0 is the unknown entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub table: Param,
}

pub const EMBEDDING_INIT_BOUND: f64 = 0.05;

impl Embedding {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            table: Param::new(Tensor2::uniform(vocab_size, dim, EMBEDDING_INIT_BOUND, rng)),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.value.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    /// Row lookup; out-of-range indices fall back to the unknown row.
    pub fn lookup(&self, index: u32) -> &[f64] {
        let i = index as usize;
        let i = if i < self.vocab_size() { i } else { 0 };
        self.table.value.row(i)
    }

    pub fn lookup_into(&self, index: u32, out: &mut [f64]) {
        out.copy_from_slice(self.lookup(index));
    }

    /// Embedding bag with average pooling; the empty bag pools to zeros.
    pub fn bag_into(&self, indices: &[u32], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if indices.is_empty() {
            return;
        }
        let w = 1.0 / indices.len() as f64;
        for &i in indices {
            axpy(w, self.lookup(i), out);
        }
    }

    pub fn bag(&self, indices: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.bag_into(indices, &mut out);
        out
    }

    pub fn backward_lookup(&mut self, index: u32, dy: &[f64]) {
        let i = index as usize;
        let i = if i < self.vocab_size() { i } else { 0 };
        axpy(1.0, dy, self.table.grad_mut().row_mut(i));
    }

    pub fn backward_bag(&mut self, indices: &[u32], dy: &[f64]) {
        if indices.is_empty() {
            return;
        }
        let w = 1.0 / indices.len() as f64;
        let n = self.vocab_size();
        let grad = self.table.grad_mut();
        for &i in indices {
            let i = i as usize;
            let i = if i < n { i } else { 0 };
            axpy(w, dy, grad.row_mut(i));
        }
    }
}

impl Parameterized for Embedding {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.table);
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bag_of_one_equals_lookup() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = Embedding::new(6, 4, &mut rng);
        for i in 0..6 {
            assert_eq!(e.bag(&[i]), e.lookup(i).to_vec());
        }
    }

    #[test]
    fn empty_bag_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = Embedding::new(3, 2, &mut rng);
        assert_eq!(e.bag(&[]), vec![0.0, 0.0]);
    }

    #[test]
    fn dense_rejects_wrong_input() {
        let d = Dense::zeros(3, 2);
        assert!(d.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn embedding_init_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = Embedding::new(50, 8, &mut rng);
        assert!(e
            .table
            .value
            .data()
            .iter()
            .all(|v| v.abs() <= EMBEDDING_INIT_BOUND));
    }
}
