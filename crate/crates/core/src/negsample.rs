//! Negative edges: copies of true events whose destination is swapped for
//! one the source never reached during training.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::vocab::UNKNOWN_INDEX;
use crate::event::Event;

/// Rejection attempts before falling back to listing the complement.
const REJECTION_TRIES: usize = 32;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct SpaceEdges {
    by_source: BTreeMap<u32, BTreeSet<u32>>,
    universe: Vec<u32>,
}

/// Destinations observed per source, kept separately for every entity space
/// that holds destinations. Fields sharing a space (email to/cc/bcc) share
/// one set per sender.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedEdgeMap {
    /// Space of each destination field.
    field_spaces: Vec<usize>,
    spaces: BTreeMap<usize, SpaceEdges>,
}

impl ObservedEdgeMap {
    /// `field_spaces[i]` is the entity space of destination field `i`. The
    /// unknown index is never recorded.
    pub fn build(events: &[Event], field_spaces: &[usize]) -> Self {
        let mut sets: BTreeMap<usize, (BTreeMap<u32, BTreeSet<u32>>, BTreeSet<u32>)> = BTreeMap::new();
        for &s in field_spaces {
            sets.entry(s).or_default();
        }
        for ev in events {
            for (field, &space) in ev.destinations.iter().zip(field_spaces) {
                let (by_source, universe) = sets.get_mut(&space).expect("space registered");
                for &d in field.iter().filter(|&&d| d != UNKNOWN_INDEX) {
                    by_source.entry(ev.source).or_default().insert(d);
                    universe.insert(d);
                }
            }
        }
        let spaces = sets
            .into_iter()
            .map(|(s, (by_source, universe))| {
                (
                    s,
                    SpaceEdges {
                        by_source,
                        universe: universe.into_iter().collect(),
                    },
                )
            })
            .collect();
        Self {
            field_spaces: field_spaces.to_vec(),
            spaces,
        }
    }

    pub fn field_spaces(&self) -> &[usize] {
        &self.field_spaces
    }

    /// Destinations observed from `source` in the space of `field`.
    pub fn observed(&self, field: usize, source: u32) -> Option<&BTreeSet<u32>> {
        let space = self.field_spaces.get(field)?;
        self.spaces[space].by_source.get(&source)
    }

    pub fn contains(&self, field: usize, source: u32, destination: u32) -> bool {
        self.observed(field, source).is_some_and(|s| s.contains(&destination))
    }

    /// Sorted destination universe of the space of `field`.
    pub fn universe(&self, field: usize) -> &[u32] {
        self.field_spaces
            .get(field)
            .map_or(&[], |s| self.spaces[s].universe.as_slice())
    }

    pub fn sources(&self, field: usize) -> impl Iterator<Item = u32> + '_ {
        let space = self.field_spaces.get(field).copied();
        space
            .into_iter()
            .flat_map(move |s| self.spaces[&s].by_source.keys().copied())
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.values().all(|s| s.universe.is_empty())
    }

    fn complement_size(&self, field: usize, source: u32) -> usize {
        let n = self.universe(field).len();
        n - self.observed(field, source).map_or(0, BTreeSet::len)
    }

    /// Uniform draw from `universe ∖ observed(source)` for `field`.
    pub fn draw_unobserved<R: Rng + ?Sized>(&self, field: usize, source: u32, rng: &mut R) -> Option<u32> {
        if self.complement_size(field, source) == 0 {
            return None;
        }
        let universe = self.universe(field);
        let observed = self.observed(field, source);
        let seen = |d: &u32| observed.is_some_and(|s| s.contains(d));
        for _ in 0..REJECTION_TRIES {
            let d = universe[rng.random_range(0..universe.len())];
            if !seen(&d) {
                return Some(d);
            }
        }
        let complement: Vec<u32> = universe.iter().copied().filter(|d| !seen(d)).collect();
        Some(complement[rng.random_range(0..complement.len())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Expected negatives generated per true event.
    pub negatives_per_positive: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            negatives_per_positive: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let r = self.negatives_per_positive;
        if r.is_finite() && r >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!(
                "negatives_per_positive must be finite and non-negative, got {r}"
            )))
        }
    }

    /// Number of negatives for one positive: the integer part of the ratio
    /// plus one more with probability equal to its fractional part.
    pub fn draw_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r = self.negatives_per_positive;
        let whole = libm::floor(r);
        let frac = r - whole;
        let extra = frac > 0.0 && rng.random::<f64>() < frac;
        whole as usize + usize::from(extra)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub generated: u64,
    /// Draws abandoned because the source had reached every destination.
    pub skipped: u64,
}

/// Replaces one destination position, chosen uniformly over all positions of
/// all destination fields, by an unobserved destination. Every other field is
/// copied unchanged.
pub fn sample_negative<R: Rng + ?Sized>(event: &Event, map: &ObservedEdgeMap, rng: &mut R) -> Option<Event> {
    let total: usize = event.destinations.iter().map(Vec::len).sum();
    if total == 0 {
        return None;
    }
    let mut pos = rng.random_range(0..total);
    let mut field = 0;
    while pos >= event.destinations[field].len() {
        pos -= event.destinations[field].len();
        field += 1;
    }
    let replacement = map.draw_unobserved(field, event.source, rng)?;
    let mut neg = event.clone();
    neg.destinations[field][pos] = replacement;
    Some(neg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub event: Event,
    pub invalid: bool,
}

/// Each positive followed immediately by its negatives.
pub fn interleave<R: Rng + ?Sized>(
    positives: &[Event],
    config: &SamplerConfig,
    map: &ObservedEdgeMap,
    rng: &mut R,
) -> Result<(Vec<Labeled>, SamplerStats)> {
    config.validate()?;
    let mut out = Vec::with_capacity(positives.len() * 2);
    let mut stats = SamplerStats::default();
    for ev in positives {
        out.push(Labeled {
            event: ev.clone(),
            invalid: false,
        });
        for _ in 0..config.draw_count(rng) {
            match sample_negative(ev, map, rng) {
                Some(event) => {
                    stats.generated += 1;
                    out.push(Labeled { event, invalid: true });
                }
                None => stats.skipped += 1,
            }
        }
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Label;
    use alloc::string::String;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge(src: u32, dst: u32) -> Event {
        Event {
            key: 0,
            timestamp: 0,
            user: String::new(),
            source: src,
            destinations: vec![vec![dst]],
            numerics: vec![],
            categoricals: vec![],
            texts: vec![],
            label: Label::Normal,
        }
    }

    const A: u32 = 1;
    const B: u32 = 2;

    #[test]
    fn builds_exact_sets() {
        let m = ObservedEdgeMap::build(&[edge(A, 1), edge(A, 2), edge(B, 1), edge(A, 2)], &[0]);
        assert_eq!(m.observed(0, A).unwrap().iter().copied().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(m.observed(0, B).unwrap().iter().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(m.universe(0), &[1, 2]);
    }

    #[test]
    fn empty_events_give_empty_map() {
        let m = ObservedEdgeMap::build(&[], &[0]);
        assert!(m.is_empty());
        assert!(m.observed(0, A).is_none());
    }

    #[test]
    fn single_element_complement() {
        let m = ObservedEdgeMap::build(&[edge(A, 1), edge(A, 2), edge(B, 3)], &[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = sample_negative(&edge(A, 1), &m, &mut rng).unwrap();
            assert_eq!(n.destinations, vec![vec![3]]);
        }
    }

    #[test]
    fn full_coverage_yields_none() {
        let m = ObservedEdgeMap::build(&[edge(A, 1), edge(A, 2)], &[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_negative(&edge(A, 1), &m, &mut rng).is_none());
    }

    #[test]
    fn interleave_counts() {
        let m = ObservedEdgeMap::build(&[edge(A, 1), edge(B, 2)], &[0]);
        let pos = vec![edge(A, 1), edge(B, 2), edge(A, 1), edge(B, 2)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (s, stats) = interleave(&pos, &SamplerConfig::default(), &m, &mut rng).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.iter().filter(|l| l.invalid).count(), 4);
        assert_eq!(stats.skipped, 0);
        assert!(s.chunks(2).all(|c| !c[0].invalid && c[1].invalid));

        let zero = SamplerConfig {
            negatives_per_positive: 0.0,
            seed: 0,
        };
        let (s, _) = interleave(&pos, &zero, &m, &mut rng).unwrap();
        assert_eq!(s.iter().map(|l| l.event.clone()).collect::<Vec<_>>(), pos);
    }

    #[test]
    fn fractional_ratio_binomial() {
        let m = ObservedEdgeMap::build(&[edge(A, 1), edge(B, 2)], &[0]);
        let pos = vec![edge(A, 1); 10_000];
        let cfg = SamplerConfig {
            negatives_per_positive: 0.5,
            seed: 0,
        };
        let (_, stats) = interleave(&pos, &cfg, &m, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert!((4_850..=5_150).contains(&stats.generated), "{}", stats.generated);
    }

    #[test]
    fn multi_destination_replaces_one_receiver() {
        let mut e = edge(A, 1);
        e.destinations = vec![vec![1, 2], vec![], vec![3]];
        let m = ObservedEdgeMap::build(&[e.clone(), edge(B, 4)], &[0, 0, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = sample_negative(&e, &m, &mut rng).unwrap();
            let changed: usize = n
                .destinations
                .iter()
                .zip(&e.destinations)
                .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
                .sum();
            assert_eq!(changed, 1);
            assert!(n.destinations.iter().flatten().any(|&d| d == 4));
        }
    }

    #[test]
    fn negative_ratio_rejected() {
        let cfg = SamplerConfig {
            negatives_per_positive: -1.0,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
    }
}
