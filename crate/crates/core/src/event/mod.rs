//! Events as attributed edges: schema, calendar features, vocabularies and
//! text pooling.

pub mod presets;
pub mod schema;
pub mod text;
pub mod time;
pub mod vocab;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IteratorRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use schema::{FeatureSchema, FieldKind, FieldSpec};
pub use text::WordVectorTable;
pub use vocab::{Vocabularies, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Label {
    #[default]
    Normal,
    /// Malicious, tagged with its scenario.
    Malicious(String),
}

impl Label {
    pub fn is_malicious(&self) -> bool {
        matches!(self, Label::Malicious(_))
    }

    pub fn scenario(&self) -> Option<&str> {
        match self {
            Label::Normal => None,
            Label::Malicious(s) => Some(s),
        }
    }

    /// Empty, `0` and `normal` (any case) are normal; any other text is a
    /// scenario tag.
    pub fn parse(cell: &str) -> Self {
        let t = cell.trim();
        if t.is_empty() || t == "0" || t.eq_ignore_ascii_case("normal") {
            Label::Normal
        } else {
            Label::Malicious(t.into())
        }
    }
}

/// One parsed log line, still holding entity names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub key: u64,
    /// Seconds since the epoch in the analysis zone.
    pub timestamp: i64,
    pub user: String,
    pub source: String,
    /// One list of names per destination field (length 1 unless multi).
    pub destinations: Vec<Vec<String>>,
    pub numerics: Vec<f64>,
    pub categoricals: Vec<String>,
    pub texts: Vec<String>,
    pub label: Label,
}

impl RawEvent {
    pub fn day(&self) -> i64 {
        time::day_index(self.timestamp)
    }
}

/// An event mapped through the training vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub key: u64,
    pub timestamp: i64,
    pub user: String,
    pub source: u32,
    pub destinations: Vec<Vec<u32>>,
    /// Standardised with the training mean and deviation.
    pub numerics: Vec<f64>,
    pub categoricals: Vec<u32>,
    /// Pooled word vectors, one per text field.
    pub texts: Vec<Vec<f64>>,
    pub label: Label,
}

impl Event {
    pub fn day(&self) -> i64 {
        time::day_index(self.timestamp)
    }
}

/// Options applied after parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    /// Fraction of users kept, in (0, 1].
    pub user_sample_rate: f64,
    /// Draw the sample among users with no malicious event.
    pub exclude_malicious: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            user_sample_rate: 1.0,
            exclude_malicious: false,
        }
    }
}

/// Chooses `round(rate · n)` users (at least one) among the candidates.
/// With `exclude_malicious`, users having any malicious event are never
/// candidates. The result is sorted.
pub fn sample_users<R: Rng + ?Sized>(
    events: &[RawEvent],
    options: &SampleOptions,
    rng: &mut R,
) -> Result<BTreeSet<String>> {
    let rate = options.user_sample_rate;
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(alloc::format!(
            "user sample rate must lie in (0, 1], got {rate}"
        )));
    }
    let malicious: BTreeSet<&str> = events
        .iter()
        .filter(|e| e.label.is_malicious())
        .map(|e| e.user.as_str())
        .collect();
    let candidates: BTreeSet<&str> = events
        .iter()
        .map(|e| e.user.as_str())
        .filter(|u| !(options.exclude_malicious && malicious.contains(u)))
        .collect();
    if rate >= 1.0 {
        return Ok(candidates.into_iter().map(String::from).collect());
    }
    let n = candidates.len();
    let k = (libm::round(rate * n as f64) as usize).clamp(1.min(n), n);
    let picked = candidates.into_iter().choose_multiple(rng, k);
    Ok(picked.into_iter().map(String::from).collect())
}

/// Keeps only events of the given users, preserving order.
pub fn retain_users(events: &mut Vec<RawEvent>, users: &BTreeSet<String>) {
    events.retain(|e| users.contains(&e.user));
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ev(user: &str, label: Label) -> RawEvent {
        RawEvent {
            key: 0,
            timestamp: 0,
            user: user.into(),
            source: user.into(),
            destinations: vec![vec!["pc".into()]],
            numerics: vec![],
            categoricals: vec![],
            texts: vec![],
            label,
        }
    }

    #[test]
    fn label_parsing() {
        assert_eq!(Label::parse(""), Label::Normal);
        assert_eq!(Label::parse("Normal"), Label::Normal);
        assert_eq!(Label::parse("0"), Label::Normal);
        assert_eq!(Label::parse("s1"), Label::Malicious("s1".into()));
    }

    #[test]
    fn full_rate_keeps_everyone() {
        let events: Vec<_> = ["A", "B", "C"].iter().map(|u| ev(u, Label::Normal)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let users = sample_users(&events, &SampleOptions::default(), &mut rng).unwrap();
        assert_eq!(users.len(), 3);
    }

    #[test]
    fn half_of_four_is_two_and_reproducible() {
        let events: Vec<_> = ["A", "B", "C", "D"].iter().map(|u| ev(u, Label::Normal)).collect();
        let opts = SampleOptions {
            user_sample_rate: 0.5,
            exclude_malicious: false,
        };
        let a = sample_users(&events, &opts, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_users(&events, &opts, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn malicious_users_can_be_excluded() {
        let events = vec![ev("A", Label::Malicious("x".into())), ev("B", Label::Normal)];
        let opts = SampleOptions {
            user_sample_rate: 1.0,
            exclude_malicious: true,
        };
        let users = sample_users(&events, &opts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(users.into_iter().collect::<Vec<_>>(), vec![String::from("B")]);
    }

    #[test]
    fn rate_out_of_range() {
        let opts = SampleOptions {
            user_sample_rate: 0.0,
            exclude_malicious: false,
        };
        assert!(sample_users(&[], &opts, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
