use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// Lowercases and splits on runs of non-alphanumeric characters, keeping at
/// most `cap` tokens.
pub fn tokenize(text: &str, cap: usize) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(cap)
        .map(str::to_lowercase)
        .collect()
}

/// Pretrained word vectors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WordVectorTable {
    dim: usize,
    index: BTreeMap<String, u32>,
    vectors: Vec<f64>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: BTreeMap::new(),
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Adds a vector. Returns `false` (keeping the first occurrence) when the
    /// token is already present.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        check_dim("word vector", self.dim, vector.len())?;
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.into(), self.index.len() as u32);
        self.vectors.extend_from_slice(vector);
        Ok(true)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| {
            let i = i as usize;
            &self.vectors[i * self.dim..(i + 1) * self.dim]
        })
    }

    /// Average of the token vectors; unknown tokens count as zero vectors and
    /// no tokens pools to the zero vector.
    pub fn pool<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if tokens.is_empty() {
            return out;
        }
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x;
                }
            }
        }
        let n = tokens.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }
}
