//! Rule baselines built from the edges seen during training.
//!
//! Destinations are compared within their entity space, so receivers in
//! `to`, `cc` and `bcc` count as one set per sender.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ScoredEvent;
use crate::event::Event;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// 0 when every destination was seen for the source, else 1.
    KnownEdge,
    /// 0 when every destination is the source's most used one, else 1.
    MostFrequentDestination,
    /// Share of destinations never seen for the source.
    UnobservedDestinationFraction,
    /// 0 when the exact destination set was seen for the source, else 1.
    KnownDestinationSet,
}

impl RuleKind {
    pub const ALL: [RuleKind; 4] = [
        RuleKind::KnownEdge,
        RuleKind::MostFrequentDestination,
        RuleKind::UnobservedDestinationFraction,
        RuleKind::KnownDestinationSet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::KnownEdge => "known_edge",
            RuleKind::MostFrequentDestination => "most_frequent_destination",
            RuleKind::UnobservedDestinationFraction => "unobserved_destination_fraction",
            RuleKind::KnownDestinationSet => "known_destination_set",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// A destination id qualified by its entity space.
type Dest = (usize, u32);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct SourceStats {
    seen: BTreeSet<Dest>,
    counts: BTreeMap<Dest, u64>,
    sets: BTreeSet<Vec<Dest>>,
    modal: Option<Dest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleModel {
    pub kind: RuleKind,
    /// Destination fields considered (all when fitted with `None`).
    pub fields: Vec<usize>,
    field_spaces: Vec<usize>,
    sources: BTreeMap<u32, SourceStats>,
}

fn destinations(event: &Event, fields: &[usize], spaces: &[usize]) -> BTreeSet<Dest> {
    fields
        .iter()
        .flat_map(|&f| event.destinations[f].iter().map(move |&d| (spaces[f], d)))
        .collect()
}

impl RuleModel {
    /// `field_spaces[i]` is the entity space of destination field `i`;
    /// `fields` restricts the rule to a subset of destination fields.
    pub fn fit(train: &[Event], kind: RuleKind, field_spaces: &[usize], fields: Option<&[usize]>) -> Result<Self> {
        let fields: Vec<usize> = match fields {
            Some(f) => f.to_vec(),
            None => (0..field_spaces.len()).collect(),
        };
        if let Some(&bad) = fields.iter().find(|&&f| f >= field_spaces.len()) {
            return Err(Error::Config(alloc::format!("rule field {bad} out of range")));
        }
        let mut sources: BTreeMap<u32, SourceStats> = BTreeMap::new();
        for ev in train {
            let dests = destinations(ev, &fields, field_spaces);
            let s = sources.entry(ev.source).or_default();
            for &d in &dests {
                s.seen.insert(d);
                *s.counts.entry(d).or_default() += 1;
            }
            s.sets.insert(dests.into_iter().collect());
        }
        for s in sources.values_mut() {
            // Ties go to the smallest index, which is the lexicographically
            // smallest name since vocabularies are built in sorted order.
            s.modal = s
                .counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(d, _)| *d);
        }
        Ok(Self {
            kind,
            fields,
            field_spaces: field_spaces.to_vec(),
            sources,
        })
    }

    /// Most used destination of `source`, if it was seen.
    pub fn modal_destination(&self, source: u32) -> Option<(usize, u32)> {
        self.sources.get(&source).and_then(|s| s.modal)
    }

    pub fn score(&self, event: &Event) -> f64 {
        let Some(stats) = self.sources.get(&event.source) else {
            return 1.0;
        };
        let dests = destinations(event, &self.fields, &self.field_spaces);
        if dests.is_empty() {
            log::warn!("event {} has no destinations in the rule fields", event.key);
            return 0.0;
        }
        let unseen = dests.iter().filter(|d| !stats.seen.contains(d)).count();
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match self.kind {
            RuleKind::KnownEdge => flag(unseen > 0),
            RuleKind::UnobservedDestinationFraction => unseen as f64 / dests.len() as f64,
            RuleKind::MostFrequentDestination => flag(dests.iter().any(|d| Some(*d) != stats.modal)),
            RuleKind::KnownDestinationSet => flag(!stats.sets.contains(&dests.into_iter().collect::<Vec<_>>())),
        }
    }

    pub fn score_all(&self, events: &[Event]) -> Vec<ScoredEvent> {
        events.iter().map(|e| ScoredEvent::from_event(e, self.score(e))).collect()
    }
}
