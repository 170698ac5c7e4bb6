//! Daily user rankings and recall at an investigation budget.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{time, Event, Label};

/// Per-event detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvent {
    pub key: u64,
    pub user: String,
    pub timestamp: i64,
    pub score: f64,
    pub label: Label,
}

impl ScoredEvent {
    pub fn from_event(event: &Event, score: f64) -> Self {
        Self {
            key: event.key,
            user: event.user.clone(),
            timestamp: event.timestamp,
            score,
            label: event.label.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDayScore {
    pub user: String,
    /// Days since 1970-01-01.
    pub day: i64,
    /// `None` for user-days with no scored event (known only from external
    /// labels); they are never ranked.
    pub score: Option<f64>,
    pub malicious: bool,
    pub scenarios: BTreeSet<String>,
}

/// One row per (user, day), sorted by day then user.
pub fn aggregate_user_days(scored: &[ScoredEvent], aggregation: Aggregation) -> Vec<UserDayScore> {
    struct Acc {
        max: f64,
        sum: f64,
        n: usize,
        scenarios: BTreeSet<String>,
        malicious: bool,
    }
    let mut groups: BTreeMap<(i64, &str), Acc> = BTreeMap::new();
    for s in scored {
        let acc = groups
            .entry((time::day_index(s.timestamp), s.user.as_str()))
            .or_insert(Acc {
                max: f64::NEG_INFINITY,
                sum: 0.0,
                n: 0,
                scenarios: BTreeSet::new(),
                malicious: false,
            });
        acc.max = acc.max.max(s.score);
        acc.sum += s.score;
        acc.n += 1;
        if let Label::Malicious(tag) = &s.label {
            acc.malicious = true;
            acc.scenarios.insert(tag.clone());
        }
    }
    groups
        .into_iter()
        .map(|((day, user), acc)| UserDayScore {
            user: user.into(),
            day,
            score: Some(match aggregation {
                Aggregation::Max => acc.max,
                Aggregation::Mean => acc.sum / acc.n as f64,
            }),
            malicious: acc.malicious,
            scenarios: acc.scenarios,
        })
        .collect()
}

/// For each day with malicious users, the rank (0-based) of every malicious
/// user, `None` when unranked.
fn malicious_ranks<'a>(
    table: &'a [UserDayScore],
    is_malicious: &dyn Fn(&UserDayScore) -> bool,
) -> Vec<Vec<Option<usize>>> {
    let mut days: BTreeMap<i64, Vec<&'a UserDayScore>> = BTreeMap::new();
    for row in table {
        days.entry(row.day).or_default().push(row);
    }
    let mut out = Vec::new();
    for rows in days.into_values() {
        if !rows.iter().any(|r| is_malicious(r)) {
            continue;
        }
        let mut ranked: Vec<&UserDayScore> = rows.iter().copied().filter(|r| r.score.is_some()).collect();
        ranked.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then_with(|| a.user.cmp(&b.user))
        });
        let position: BTreeMap<&str, usize> = ranked.iter().enumerate().map(|(i, r)| (r.user.as_str(), i)).collect();
        let mut seen = BTreeSet::new();
        let ranks = rows
            .iter()
            .filter(|r| is_malicious(r) && seen.insert(r.user.as_str()))
            .map(|r| r.score.and(position.get(r.user.as_str()).copied()))
            .collect();
        out.push(ranks);
    }
    out
}

fn recall_from_ranks(ranks: &[Vec<Option<usize>>], k: usize) -> f64 {
    let total: f64 = ranks
        .iter()
        .map(|day| day.iter().filter(|r| r.is_some_and(|r| r < k)).count() as f64 / day.len() as f64)
        .sum();
    total / ranks.len() as f64
}

/// Mean over days with malicious users of the fraction found in the top `k`.
pub fn recall_at_budget(table: &[UserDayScore], k: usize) -> Result<f64> {
    let ranks = malicious_ranks(table, &|r| r.malicious);
    if ranks.is_empty() {
        return Err(Error::UndefinedMetric("no day has a malicious user"));
    }
    Ok(recall_from_ranks(&ranks, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    pub budgets: Vec<usize>,
    pub recall: Vec<f64>,
    /// Running sum of `recall` divided by the number of grid points.
    pub cumulative: Vec<f64>,
}

impl RecallCurve {
    /// Number of grid points.
    pub fn n(&self) -> usize {
        self.budgets.len()
    }

    /// Cumulative recall at the last grid point.
    pub fn final_cr(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Cumulative recall at the largest grid budget not above `k`.
    pub fn cr_at(&self, k: usize) -> Option<f64> {
        let i = self.budgets.partition_point(|&b| b <= k);
        i.checked_sub(1).map(|i| self.cumulative[i])
    }
}

/// Budgets `0, step, 2·step, …` with `k_max` appended when `step` does not
/// divide it.
pub fn budget_grid(k_max: usize, step: usize) -> Result<Vec<usize>> {
    if k_max == 0 || step == 0 {
        return Err(Error::Config("k_max and step must be positive".into()));
    }
    let mut grid: Vec<usize> = (0..=k_max).step_by(step).collect();
    if grid.last() != Some(&k_max) {
        grid.push(k_max);
    }
    Ok(grid)
}

fn curve_from_ranks(ranks: &[Vec<Option<usize>>], grid: Vec<usize>) -> RecallCurve {
    let recall: Vec<f64> = grid.iter().map(|&k| recall_from_ranks(ranks, k)).collect();
    let n = grid.len() as f64;
    let mut acc = 0.0;
    let cumulative = recall
        .iter()
        .map(|r| {
            acc += r;
            acc / n
        })
        .collect();
    RecallCurve {
        budgets: grid,
        recall,
        cumulative,
    }
}

pub fn recall_curve(table: &[UserDayScore], k_max: usize, step: usize) -> Result<RecallCurve> {
    let grid = budget_grid(k_max, step)?;
    let ranks = malicious_ranks(table, &|r| r.malicious);
    if ranks.is_empty() {
        return Err(Error::UndefinedMetric("no day has a malicious user"));
    }
    Ok(curve_from_ranks(&ranks, grid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    /// `None` when the scenario has no malicious user-day in the table.
    pub curve: Option<RecallCurve>,
}

/// One curve per scenario, counting only that scenario's user-days as
/// malicious. Scenarios listed in `expected` but absent from the table are
/// reported without a curve.
pub fn per_scenario_report(
    table: &[UserDayScore],
    expected: &[String],
    k_max: usize,
    step: usize,
) -> Result<Vec<ScenarioReport>> {
    let grid = budget_grid(k_max, step)?;
    let mut tags: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
    tags.extend(table.iter().flat_map(|r| r.scenarios.iter().map(String::as_str)));
    Ok(tags
        .into_iter()
        .map(|tag| {
            let ranks = malicious_ranks(table, &|r| r.scenarios.contains(tag));
            ScenarioReport {
                scenario: tag.into(),
                curve: (!ranks.is_empty()).then(|| curve_from_ranks(&ranks, grid.clone())),
            }
        })
        .collect())
}

/// A malicious user-day from a label file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelRecord {
    pub user: String,
    pub day: i64,
    pub scenario: String,
}

/// Marks every labelled user-day malicious (keeping existing flags). Labels
/// for user-days absent from the table add unscored rows, which count as
/// missed; the number of such rows is returned.
pub fn cross_source_labels(table: &mut Vec<UserDayScore>, labels: &[LabelRecord]) -> usize {
    let mut index: BTreeMap<(i64, String), usize> = table
        .iter()
        .enumerate()
        .map(|(i, r)| ((r.day, r.user.clone()), i))
        .collect();
    let mut added = 0;
    for l in labels {
        let key = (l.day, l.user.clone());
        let i = match index.get(&key) {
            Some(&i) => i,
            None => {
                log::warn!("label for {} on day {} has no scored events", l.user, l.day);
                table.push(UserDayScore {
                    user: l.user.clone(),
                    day: l.day,
                    score: None,
                    malicious: false,
                    scenarios: BTreeSet::new(),
                });
                added += 1;
                index.insert(key, table.len() - 1);
                table.len() - 1
            }
        };
        table[i].malicious = true;
        table[i].scenarios.insert(l.scenario.clone());
    }
    table.sort_by(|a, b| (a.day, &a.user).cmp(&(b.day, &b.user)));
    added
}

/// Labels implied by the malicious events of a scored stream.
pub fn labels_from_events(scored: &[ScoredEvent]) -> Vec<LabelRecord> {
    let set: BTreeSet<LabelRecord> = scored
        .iter()
        .filter_map(|s| {
            s.label.scenario().map(|tag| LabelRecord {
                user: s.user.clone(),
                day: time::day_index(s.timestamp),
                scenario: tag.into(),
            })
        })
        .collect();
    set.into_iter().collect()
}

/// Mean and 95% half-width `1.96 · s / √n` with the sample deviation `s`.
/// The half-width is zero for a single value.
pub fn confidence_interval(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, 1.96 * libm::sqrt(var) / libm::sqrt(n)))
}
