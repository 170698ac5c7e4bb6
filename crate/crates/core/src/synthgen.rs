//! Seeded generator of small logon (or email) logs with planted anomalies.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::LabelRecord;
use crate::event::time::{day_of_week, days_from_civil, SECONDS_PER_DAY};
use crate::event::{Label, RawEvent};
use crate::model::{component_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Events towards destinations the user never used in training.
    UnseenDestination,
    /// Events with usual destinations between 00:00 and 05:00.
    OffHours,
    /// Extra events with usual destinations inside working hours.
    Burst,
}

impl AnomalyKind {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::UnseenDestination => "unseen_destination",
            AnomalyKind::OffHours => "off_hours",
            AnomalyKind::Burst => "burst",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAnomaly {
    /// User number, `0..users`.
    pub user: usize,
    /// Day within the test period, `0..test_days`.
    pub day: usize,
    pub kind: AnomalyKind,
    pub events: usize,
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub users: usize,
    pub destinations: usize,
    pub train_days: usize,
    pub test_days: usize,
    /// Poisson mean of events per user per working day.
    pub events_per_day: f64,
    /// Probability that a normal event uses the user's main destination.
    pub affinity: f64,
    /// Secondary destinations per user.
    pub pool_size: usize,
    pub work_start_hour: u32,
    pub work_end_hour: u32,
    pub off_hours_end_hour: u32,
    /// First day, as a day index (default 2010-01-04, a Monday).
    pub start_day: i64,
    /// Email-shaped output: receivers in to/cc/bcc, size and content.
    pub email: bool,
    pub anomalies: Vec<PlannedAnomaly>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 50,
            destinations: 20,
            train_days: 30,
            test_days: 10,
            events_per_day: 6.0,
            affinity: 0.8,
            pool_size: 3,
            work_start_hour: 8,
            work_end_hour: 18,
            off_hours_end_hour: 5,
            start_day: days_from_civil(2010, 1, 4),
            email: false,
            anomalies: Vec::new(),
            seed: 0,
        }
    }
}

pub const FIXTURE_ANOMALIES: usize = 5;
pub const FIXTURE_EVENTS_PER_ANOMALY: usize = 3;

impl SynthConfig {
    /// Default sizes with five planted unseen-destination user-days on
    /// distinct users, positioned from `seed`.
    pub fn fixture(seed: u64) -> Self {
        let d = Self::default();
        Self {
            anomalies: Self::fixture_plan(seed, d.users, d.test_days),
            seed,
            ..d
        }
    }

    /// Up to five unseen-destination user-days on distinct users.
    pub fn fixture_plan(seed: u64, users: usize, test_days: usize) -> Vec<PlannedAnomaly> {
        if users == 0 || test_days == 0 {
            return Vec::new();
        }
        let mut rng = component_rng(seed, streams::FIXTURE_PLAN);
        let picked = rand::seq::index::sample(&mut rng, users, FIXTURE_ANOMALIES.min(users));
        picked
            .into_iter()
            .map(|user| PlannedAnomaly {
                user,
                day: rng.random_range(0..test_days),
                kind: AnomalyKind::UnseenDestination,
                events: FIXTURE_EVENTS_PER_ANOMALY,
                scenario: AnomalyKind::UnseenDestination.name().into(),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.users == 0 || self.destinations == 0 || self.train_days == 0 {
            return fail("users, destinations and train_days must be positive".into());
        }
        if self.pool_size + 1 > self.destinations {
            return fail(format!(
                "pool of {} plus the main destination exceeds {} destinations",
                self.pool_size, self.destinations
            ));
        }
        if !(self.events_per_day > 0.0 && self.events_per_day.is_finite()) {
            return fail("events_per_day must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.affinity) {
            return fail("affinity must lie in [0, 1]".into());
        }
        if self.work_start_hour >= self.work_end_hour || self.work_end_hour > 24 {
            return fail("working hours must satisfy start < end <= 24".into());
        }
        if self.off_hours_end_hour == 0 || self.off_hours_end_hour > self.work_start_hour {
            return fail("off-hours window must end after midnight and before work starts".into());
        }
        let unseen_available = self.destinations - self.pool_size - 1;
        for a in &self.anomalies {
            if a.user >= self.users || a.day >= self.test_days {
                return fail(format!("anomaly on user {} day {} is out of range", a.user, a.day));
            }
            if a.events == 0 {
                return fail("anomalies need at least one event".into());
            }
            if a.kind == AnomalyKind::UnseenDestination && a.events > unseen_available {
                return fail(format!(
                    "anomaly asks for {} unseen destinations but at most {unseen_available} exist",
                    a.events
                ));
            }
            if a.scenario.trim().is_empty() {
                return fail("anomaly scenario tag is empty".into());
            }
        }
        Ok(())
    }
}

pub fn user_name(i: usize) -> String {
    format!("USR{:04}", i + 1)
}

pub fn destination_name(i: usize, email: bool) -> String {
    if email {
        format!("contact{:04}@example.com", i + 1)
    } else {
        format!("PC-{:04}", i + 1)
    }
}

pub fn user_address(i: usize) -> String {
    format!("usr{:04}@example.com", i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub train: Vec<RawEvent>,
    pub test: Vec<RawEvent>,
    pub labels: Vec<LabelRecord>,
}

struct Profile {
    main: usize,
    pool: Vec<usize>,
}

const WORDS: [&str; 12] = [
    "meeting", "report", "budget", "schedule", "review", "project", "update", "lunch", "draft", "client", "notes",
    "plan",
];

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: rand_chacha::ChaCha8Rng,
}

impl Gen<'_> {
    fn time_in(&mut self, day: i64, start_hour: u32, end_hour: u32) -> i64 {
        let lo = start_hour as i64 * 3600;
        let hi = end_hour as i64 * 3600;
        day * SECONDS_PER_DAY + self.rng.random_range(lo..hi)
    }

    fn usual_destination(&mut self, p: &Profile) -> usize {
        if p.pool.is_empty() || self.rng.random::<f64>() < self.cfg.affinity {
            p.main
        } else {
            *p.pool.choose(&mut self.rng).expect("pool")
        }
    }

    fn event(&mut self, user: usize, ts: i64, dest: usize, label: Label) -> RawEvent {
        let email = self.cfg.email;
        let mut ev = RawEvent {
            key: 0,
            timestamp: ts,
            user: user_name(user),
            source: if email { user_address(user) } else { user_name(user) },
            destinations: vec![vec![destination_name(dest, email)]],
            numerics: vec![],
            categoricals: vec![],
            texts: vec![],
            label,
        };
        if email {
            let cc = if self.rng.random::<f64>() < 0.2 {
                vec![destination_name(self.rng.random_range(0..self.cfg.destinations), true)]
            } else {
                vec![]
            };
            ev.destinations.push(cc);
            ev.destinations.push(vec![]);
            ev.numerics.push(self.rng.random_range(1_000..50_000) as f64);
            let n = self.rng.random_range(2..6);
            let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(&mut self.rng).expect("words")).collect();
            ev.texts.push(words.join(" "));
        } else {
            let act = if self.rng.random::<bool>() { "Logon" } else { "Logoff" };
            ev.categoricals.push(act.into());
        }
        ev
    }
}

/// Generates the train and test periods; test days follow the train days.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut g = Gen {
        cfg,
        rng: component_rng(cfg.seed, streams::SYNTH),
    };
    let profiles: Vec<Profile> = (0..cfg.users)
        .map(|_| {
            let picks = rand::seq::index::sample(&mut g.rng, cfg.destinations, cfg.pool_size + 1).into_vec();
            Profile {
                main: picks[0],
                pool: picks[1..].to_vec(),
            }
        })
        .collect();
    let poisson = Poisson::new(cfg.events_per_day).map_err(|e| Error::Config(format!("{e}")))?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    let total_days = cfg.train_days + cfg.test_days;
    for d in 0..total_days {
        let day = cfg.start_day + d as i64;
        let working = day_of_week(day * SECONDS_PER_DAY) < 5;
        for (u, p) in profiles.iter().enumerate() {
            let n = if working { poisson.sample(&mut g.rng) as usize } else { 0 };
            for _ in 0..n {
                let ts = g.time_in(day, cfg.work_start_hour, cfg.work_end_hour);
                let dest = g.usual_destination(p);
                let ev = g.event(u, ts, dest, Label::Normal);
                if d < cfg.train_days {
                    train.push(ev);
                } else {
                    test.push(ev);
                }
            }
        }
    }

    let mut labels = BTreeSet::new();
    for a in &cfg.anomalies {
        let day = cfg.start_day + (cfg.train_days + a.day) as i64;
        let p = &profiles[a.user];
        let label = Label::Malicious(a.scenario.clone());
        let used: BTreeSet<String> = train
            .iter()
            .filter(|e| e.user == user_name(a.user))
            .flat_map(|e| e.destinations.iter().flatten().cloned())
            .collect();
        let mut unseen: Vec<usize> = (0..cfg.destinations)
            .filter(|&d| !used.contains(&destination_name(d, cfg.email)))
            .collect();
        for _ in 0..a.events {
            let ev = match a.kind {
                AnomalyKind::UnseenDestination => {
                    let i = g.rng.random_range(0..unseen.len());
                    let dest = unseen.swap_remove(i);
                    let ts = g.time_in(day, cfg.work_start_hour, cfg.work_end_hour);
                    g.event(a.user, ts, dest, label.clone())
                }
                AnomalyKind::OffHours => {
                    let ts = g.time_in(day, 0, cfg.off_hours_end_hour);
                    let dest = g.usual_destination(p);
                    g.event(a.user, ts, dest, label.clone())
                }
                AnomalyKind::Burst => {
                    let ts = g.time_in(day, cfg.work_start_hour, cfg.work_end_hour);
                    let dest = g.usual_destination(p);
                    g.event(a.user, ts, dest, label.clone())
                }
            };
            test.push(ev);
        }
        labels.insert(LabelRecord {
            user: user_name(a.user),
            day,
            scenario: a.scenario.clone(),
        });
    }

    train.sort_by_key(|e| e.timestamp);
    test.sort_by_key(|e| e.timestamp);
    for (k, e) in train.iter_mut().chain(test.iter_mut()).enumerate() {
        e.key = k as u64 + 1;
    }
    Ok(SynthOutput {
        train,
        test,
        labels: labels.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::time::{day_index, minute_of_day};

    fn small() -> SynthConfig {
        SynthConfig {
            users: 6,
            destinations: 8,
            train_days: 10,
            test_days: 4,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn full_affinity_uses_main_destination() {
        let cfg = SynthConfig {
            affinity: 1.0,
            pool_size: 1,
            ..small()
        };
        let out = generate(&cfg).unwrap();
        for u in 0..cfg.users {
            let dests: BTreeSet<_> = out
                .train
                .iter()
                .chain(&out.test)
                .filter(|e| e.user == user_name(u))
                .map(|e| e.destinations[0][0].clone())
                .collect();
            assert!(dests.len() <= 1);
        }
    }

    #[test]
    fn planted_unseen_destinations() {
        let cfg = SynthConfig {
            anomalies: vec![PlannedAnomaly {
                user: 2,
                day: 1,
                kind: AnomalyKind::UnseenDestination,
                events: 3,
                scenario: "s1".into(),
            }],
            ..small()
        };
        let out = generate(&cfg).unwrap();
        let bad: Vec<_> = out.test.iter().filter(|e| e.label.is_malicious()).collect();
        assert_eq!(bad.len(), 3);
        let seen: BTreeSet<_> = out
            .train
            .iter()
            .filter(|e| e.user == user_name(2))
            .map(|e| e.destinations[0][0].clone())
            .collect();
        for e in bad {
            assert!(!seen.contains(&e.destinations[0][0]));
            assert_eq!(day_index(e.timestamp), cfg.start_day + 11);
        }
        assert_eq!(out.labels.len(), 1);
    }

    #[test]
    fn off_hours_window() {
        let cfg = SynthConfig {
            anomalies: vec![PlannedAnomaly {
                user: 0,
                day: 0,
                kind: AnomalyKind::OffHours,
                events: 4,
                scenario: "night".into(),
            }],
            ..small()
        };
        let out = generate(&cfg).unwrap();
        for e in out.test.iter().filter(|e| e.label.is_malicious()) {
            assert!(minute_of_day(e.timestamp) < 5 * 60);
        }
        for e in out.train.iter().chain(out.test.iter().filter(|e| !e.label.is_malicious())) {
            let m = minute_of_day(e.timestamp);
            assert!((8 * 60..18 * 60).contains(&m));
        }
    }

    #[test]
    fn too_many_unseen_destinations() {
        let cfg = SynthConfig {
            anomalies: vec![PlannedAnomaly {
                user: 0,
                day: 0,
                kind: AnomalyKind::UnseenDestination,
                events: 5,
                scenario: "s".into(),
            }],
            ..small()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::fixture(4);
        assert_eq!(cfg.anomalies.len(), 5);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn email_variant_shape() {
        let out = generate(&SynthConfig { email: true, ..small() }).unwrap();
        let e = &out.train[0];
        assert_eq!(e.destinations.len(), 3);
        assert_eq!(e.numerics.len(), 1);
        assert_eq!(e.texts.len(), 1);
        assert!(e.source.ends_with("@example.com"));
    }
}
