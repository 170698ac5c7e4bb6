//! Brute-force reference implementations and random instance generators
//! shared by the property tests and the acceptance suite. Everything here is
//! written from the metric and rule definitions, without reusing library
//! code paths.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use adsage_core::eval::UserDayScore;
use adsage_core::event::{Event, Label};
use adsage_core::rules::RuleKind;
use rand::Rng;

const SCORES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// A user-day table with at most `max_days` days and `max_users` users.
/// Scores come from a small set so that ties are common, some malicious
/// rows are unscored, and tags are drawn from `s1`/`s2`.
pub fn random_table<R: Rng>(rng: &mut R, max_days: usize, max_users: usize) -> Vec<UserDayScore> {
    let days = rng.random_range(1..=max_days);
    let users = rng.random_range(1..=max_users);
    let mut table = Vec::new();
    for d in 0..days {
        for u in 0..users {
            if rng.random_bool(0.2) {
                continue;
            }
            let malicious = rng.random_bool(0.25);
            let mut scenarios = BTreeSet::new();
            if malicious {
                scenarios.insert(if rng.random_bool(0.5) { "s1" } else { "s2" }.to_string());
                if rng.random_bool(0.2) {
                    scenarios.insert("s2".to_string());
                }
            }
            let score = if malicious && rng.random_bool(0.1) {
                None
            } else {
                Some(SCORES[rng.random_range(0..SCORES.len())])
            };
            table.push(UserDayScore {
                user: format!("u{u:02}"),
                day: 14_600 + d as i64,
                score,
                malicious,
                scenarios,
            });
        }
    }
    table
}

/// Does row `r` rank above row `m` on their day?
fn beats(r: &UserDayScore, m: &UserDayScore) -> bool {
    match (r.score, m.score) {
        (Some(a), Some(b)) => a > b || (a == b && r.user < m.user),
        (Some(_), None) => true,
        _ => false,
    }
}

/// Mean over days with a malicious row of the share of malicious rows with
/// fewer than `k` rows ranked above them. `None` without malicious days.
pub fn recall_oracle(table: &[UserDayScore], k: usize, is_malicious: &dyn Fn(&UserDayScore) -> bool) -> Option<f64> {
    let days: BTreeSet<i64> = table.iter().map(|r| r.day).collect();
    let mut total = 0.0;
    let mut n = 0usize;
    for d in days {
        let rows: Vec<&UserDayScore> = table.iter().filter(|r| r.day == d).collect();
        let bad: Vec<&UserDayScore> = rows.iter().copied().filter(|r| is_malicious(r)).collect();
        if bad.is_empty() {
            continue;
        }
        let found = bad
            .iter()
            .filter(|m| m.score.is_some() && rows.iter().filter(|r| beats(r, m)).count() < k)
            .count();
        total += found as f64 / bad.len() as f64;
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}

pub fn grid_oracle(k_max: usize, step: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut k = 0;
    while k <= k_max {
        grid.push(k);
        k += step;
    }
    if *grid.last().unwrap() != k_max {
        grid.push(k_max);
    }
    grid
}

/// `(budgets, R, CR)` from the definitions.
pub fn curve_oracle(
    table: &[UserDayScore],
    k_max: usize,
    step: usize,
    is_malicious: &dyn Fn(&UserDayScore) -> bool,
) -> Option<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let grid = grid_oracle(k_max, step);
    let r: Vec<f64> = grid
        .iter()
        .map(|&k| recall_oracle(table, k, is_malicious))
        .collect::<Option<_>>()?;
    let n = grid.len() as f64;
    let cr = (0..grid.len()).map(|i| r[..=i].iter().fold(0.0, |a, b| a + b) / n).collect();
    Some((grid, r, cr))
}

/// A random event over `field_spaces` destination fields. Sources are in
/// `1..=sources`, destinations in `0..=dests` (0 being the unknown entity).
pub fn random_event<R: Rng>(rng: &mut R, field_spaces: &[usize], sources: u32, dests: u32) -> Event {
    let destinations = field_spaces
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let n = if i == 0 { rng.random_range(1..=3) } else { rng.random_range(0..=3) };
            (0..n).map(|_| rng.random_range(0..=dests)).collect()
        })
        .collect();
    Event {
        key: rng.random(),
        timestamp: rng.random_range(0..1_000_000),
        user: format!("u{}", rng.random_range(0..3)),
        source: rng.random_range(1..=sources),
        destinations,
        numerics: vec![rng.random::<f64>()],
        categoricals: vec![rng.random_range(0..3)],
        texts: vec![],
        label: Label::Normal,
    }
}

fn event_destinations(e: &Event, fields: &[usize], spaces: &[usize]) -> Vec<(usize, u32)> {
    let mut out: Vec<(usize, u32)> = fields
        .iter()
        .flat_map(|&f| e.destinations[f].iter().map(move |&d| (spaces[f], d)))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Rule score recomputed by scanning the whole training set.
pub fn rule_oracle(kind: RuleKind, train: &[Event], fields: &[usize], spaces: &[usize], event: &Event) -> f64 {
    let history: Vec<Vec<(usize, u32)>> = train
        .iter()
        .filter(|t| t.source == event.source)
        .map(|t| event_destinations(t, fields, spaces))
        .collect();
    if history.is_empty() {
        return 1.0;
    }
    let dests = event_destinations(event, fields, spaces);
    if dests.is_empty() {
        return 0.0;
    }
    let seen = |d: &(usize, u32)| history.iter().any(|h| h.contains(d));
    let unseen = dests.iter().filter(|d| !seen(d)).count();
    match kind {
        RuleKind::KnownEdge => (unseen > 0) as u8 as f64,
        RuleKind::UnobservedDestinationFraction => unseen as f64 / dests.len() as f64,
        RuleKind::KnownDestinationSet => (!history.contains(&dests)) as u8 as f64,
        RuleKind::MostFrequentDestination => {
            let mut counts: BTreeMap<(usize, u32), usize> = BTreeMap::new();
            for h in &history {
                for d in h {
                    *counts.entry(*d).or_default() += 1;
                }
            }
            let best = counts.values().copied().max();
            let modal = counts.iter().find(|(_, &c)| Some(c) == best).map(|(d, _)| *d);
            dests.iter().any(|d| Some(*d) != modal) as u8 as f64
        }
    }
}
