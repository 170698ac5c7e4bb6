use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::event::{time, Event, FeatureSchema, Vocabularies};
use crate::nn::{Embedding, Param, Parameterized};

pub const TIME_FEATURES: usize = 4;

/// Shape of the encoded event vector for one schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLayout {
    pub space_dims: Vec<usize>,
    pub space_sizes: Vec<usize>,
    pub source_space: usize,
    /// Space of each destination field.
    pub destination_spaces: Vec<usize>,
    pub numerics: usize,
    /// Class count (unknown included) of each categorical field.
    pub categorical_sizes: Vec<usize>,
    pub texts: usize,
    pub text_dim: usize,
}

impl EventLayout {
    pub fn new(schema: &FeatureSchema, vocabs: &Vocabularies) -> Self {
        Self {
            space_dims: schema.spaces().iter().map(|s| s.dim).collect(),
            space_sizes: vocabs.spaces.iter().map(|v| v.len()).collect(),
            source_space: schema.source_space(),
            destination_spaces: schema.destination_spaces(),
            numerics: vocabs.numeric_stats.len(),
            categorical_sizes: vocabs.categoricals.iter().map(|v| v.len()).collect(),
            texts: schema.fields_of(crate::event::FieldKind::Text).count(),
            text_dim: vocabs.text_dim,
        }
    }

    pub fn source_dim(&self) -> usize {
        self.space_dims[self.source_space]
    }

    pub fn destination_dim(&self, field: usize) -> usize {
        self.space_dims[self.destination_spaces[field]]
    }

    /// Offset of the time block.
    pub fn time_offset(&self) -> usize {
        self.source_dim() + (0..self.destination_spaces.len()).map(|f| self.destination_dim(f)).sum::<usize>()
    }

    pub fn numeric_offset(&self) -> usize {
        self.time_offset() + TIME_FEATURES
    }

    pub fn categorical_offset(&self) -> usize {
        self.numeric_offset() + self.numerics
    }

    pub fn text_offset(&self) -> usize {
        self.categorical_offset() + self.categorical_sizes.iter().sum::<usize>()
    }

    /// Length of every encoded event.
    pub fn len(&self) -> usize {
        self.text_offset() + self.texts * self.text_dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Event encoder owning one embedding table per entity space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub layout: EventLayout,
    pub tables: Vec<Embedding>,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(layout: EventLayout, rng: &mut R) -> Self {
        let tables = layout
            .space_sizes
            .iter()
            .zip(&layout.space_dims)
            .map(|(&n, &d)| Embedding::new(n, d, rng))
            .collect();
        Self { layout, tables }
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    fn check(&self, event: &Event) -> Result<()> {
        let l = &self.layout;
        check_dim("destination fields", l.destination_spaces.len(), event.destinations.len())?;
        check_dim("numeric fields", l.numerics, event.numerics.len())?;
        check_dim("categorical fields", l.categorical_sizes.len(), event.categoricals.len())?;
        check_dim("text fields", l.texts, event.texts.len())?;
        for t in &event.texts {
            check_dim("pooled text", l.text_dim, t.len())?;
        }
        Ok(())
    }

    /// Pooled embedding of destination field `field`.
    pub fn destination_vector(&self, event: &Event, field: usize) -> Vec<f64> {
        self.tables[self.layout.destination_spaces[field]].bag(&event.destinations[field])
    }

    /// Source ⊕ destinations ⊕ time ⊕ numerics ⊕ one-hot categoricals ⊕ text.
    pub fn encode(&self, event: &Event) -> Result<Vec<f64>> {
        self.check(event)?;
        let l = &self.layout;
        let mut out = vec![0.0; l.len()];
        let mut at = l.source_dim();
        self.tables[l.source_space].lookup_into(event.source, &mut out[..at]);
        for (f, ids) in event.destinations.iter().enumerate() {
            let d = l.destination_dim(f);
            self.tables[l.destination_spaces[f]].bag_into(ids, &mut out[at..at + d]);
            at += d;
        }
        out[at..at + TIME_FEATURES].copy_from_slice(&time::encode_time(event.timestamp));
        at += TIME_FEATURES;
        out[at..at + l.numerics].copy_from_slice(&event.numerics);
        at += l.numerics;
        for (&c, &size) in event.categoricals.iter().zip(&l.categorical_sizes) {
            let c = c as usize;
            out[at + if c < size { c } else { 0 }] = 1.0;
            at += size;
        }
        for t in &event.texts {
            out[at..at + l.text_dim].copy_from_slice(t);
            at += l.text_dim;
        }
        Ok(out)
    }

    /// Accumulates `grad` (with respect to the encoded vector) into the
    /// embedding tables. The other blocks have no parameters.
    pub fn backward(&mut self, event: &Event, grad: &[f64]) {
        let l = &self.layout;
        let mut at = l.source_dim();
        let src = l.source_space;
        let spaces = l.destination_spaces.clone();
        let dims: Vec<usize> = (0..spaces.len()).map(|f| l.destination_dim(f)).collect();
        self.tables[src].backward_lookup(event.source, &grad[..at]);
        for (f, ids) in event.destinations.iter().enumerate() {
            self.tables[spaces[f]].backward_bag(ids, &grad[at..at + dims[f]]);
            at += dims[f];
        }
    }
}

impl Parameterized for Encoder {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for t in &mut self.tables {
            t.visit_params(f);
        }
    }
}
