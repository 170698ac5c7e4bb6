use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::schema::{FeatureSchema, FieldKind};
use super::text::WordVectorTable;
use super::{Event, RawEvent};
use crate::error::{Error, Result};

pub const UNKNOWN: &str = "<unk>";
pub const UNKNOWN_INDEX: u32 = 0;

/// Dense name ↔ index map. Index 0 is reserved for names never seen when
/// the vocabulary was built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Self { names, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.names
    }
}

impl Vocabulary {
    /// Builds from any collection of names: distinct names are inserted in
    /// lexicographic order after the unknown slot.
    pub fn build<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let distinct: BTreeSet<&str> = names.into_iter().collect();
        let mut all = Vec::with_capacity(distinct.len() + 1);
        all.push(UNKNOWN.to_string());
        all.extend(distinct.into_iter().map(str::to_string));
        Self::from(all)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.len() <= 1
    }

    pub fn index_of(&self, name: &str) -> u32 {
        self.index.get(name).copied().unwrap_or(UNKNOWN_INDEX)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn name(&self, index: u32) -> Option<&str> {
        self.names.get(index as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Everything learned from the training period that is needed to turn raw
/// events into model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    /// One per entity space, in [`FeatureSchema::spaces`] order.
    pub spaces: Vec<Vocabulary>,
    pub categoricals: Vec<Vocabulary>,
    /// `(mean, std)` of each numeric field over the training events.
    pub numeric_stats: Vec<(f64, f64)>,
    /// Width of pooled text vectors (0 without word vectors).
    pub text_dim: usize,
}

impl Vocabularies {
    pub fn build(train: &[RawEvent], schema: &FeatureSchema, word_vectors: Option<&WordVectorTable>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        schema.validate()?;
        let spaces_spec = schema.spaces();
        let src_space = schema.source_space();
        let dest_spaces = schema.destination_spaces();
        let mut names: Vec<BTreeSet<&str>> = spaces_spec.iter().map(|_| BTreeSet::new()).collect();
        let n_cat = schema.fields_of(FieldKind::Categorical).count();
        let mut cats: Vec<BTreeSet<&str>> = (0..n_cat).map(|_| BTreeSet::new()).collect();
        let n_num = schema.fields_of(FieldKind::Numeric).count();
        let mut sums = alloc::vec![(0.0f64, 0.0f64); n_num];

        for ev in train {
            names[src_space].insert(ev.source.as_str());
            for (field, &space) in ev.destinations.iter().zip(&dest_spaces) {
                names[space].extend(field.iter().map(String::as_str));
            }
            for (set, c) in cats.iter_mut().zip(&ev.categoricals) {
                set.insert(c.as_str());
            }
            for (acc, &v) in sums.iter_mut().zip(&ev.numerics) {
                acc.0 += v;
                acc.1 += v * v;
            }
        }
        let n = train.len() as f64;
        let numeric_stats = sums
            .into_iter()
            .map(|(s, sq)| {
                let mean = s / n;
                let var = (sq / n - mean * mean).max(0.0);
                let std = libm::sqrt(var);
                (mean, if std > 1e-12 { std } else { 1.0 })
            })
            .collect();
        Ok(Self {
            spaces: names.into_iter().map(Vocabulary::build).collect(),
            categoricals: cats.into_iter().map(Vocabulary::build).collect(),
            numeric_stats,
            text_dim: word_vectors.map_or(0, WordVectorTable::dim),
        })
    }

    /// Maps names to indices (unseen → 0), standardises numerics and pools
    /// text through the word vectors.
    pub fn index_event(
        &self,
        raw: &RawEvent,
        schema: &FeatureSchema,
        word_vectors: Option<&WordVectorTable>,
    ) -> Result<Event> {
        let src_space = schema.source_space();
        let dest_spaces = schema.destination_spaces();
        if raw.destinations.len() != dest_spaces.len()
            || raw.numerics.len() != self.numeric_stats.len()
            || raw.categoricals.len() != self.categoricals.len()
        {
            return Err(Error::Schema("event does not match schema layout".to_string()));
        }
        let wv_dim = word_vectors.map_or(0, WordVectorTable::dim);
        if wv_dim != self.text_dim {
            return Err(Error::Config(alloc::format!(
                "word vectors have dim {wv_dim}, vocabularies expect {}",
                self.text_dim
            )));
        }
        let destinations = raw
            .destinations
            .iter()
            .zip(&dest_spaces)
            .map(|(names, &s)| names.iter().map(|n| self.spaces[s].index_of(n)).collect())
            .collect();
        let numerics = raw
            .numerics
            .iter()
            .zip(&self.numeric_stats)
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let categoricals = raw
            .categoricals
            .iter()
            .zip(&self.categoricals)
            .map(|(c, v)| v.index_of(c))
            .collect();
        let texts = match word_vectors {
            Some(wv) => raw
                .texts
                .iter()
                .map(|t| wv.pool(&super::text::tokenize(t, schema.text_token_cap)))
                .collect(),
            None => raw.texts.iter().map(|_| Vec::new()).collect(),
        };
        Ok(Event {
            key: raw.key,
            timestamp: raw.timestamp,
            user: raw.user.clone(),
            source: self.spaces[src_space].index_of(&raw.source),
            destinations,
            numerics,
            categoricals,
            texts,
            label: raw.label.clone(),
        })
    }

    pub fn index_all(
        &self,
        raws: &[RawEvent],
        schema: &FeatureSchema,
        word_vectors: Option<&WordVectorTable>,
    ) -> Result<Vec<Event>> {
        raws.iter().map(|r| self.index_event(r, schema, word_vectors)).collect()
    }
}
