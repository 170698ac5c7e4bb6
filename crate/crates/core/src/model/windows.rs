//! Per-user training windows and their assembly into batches.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::event::Event;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    /// Index of the user in [`Windows::users`].
    pub user: usize,
    /// Indices into the event slice, chronological.
    pub events: Vec<usize>,
    /// The event following the window, predicted by the RNN.
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Windows {
    pub users: Vec<alloc::string::String>,
    pub windows: Vec<Window>,
}

/// Splits every user's events into consecutive windows of `timesteps`
/// events (the last one may be shorter). Windows are ordered by the
/// timestamp of their last event, then user, then position.
pub fn build_windows(events: &[Event], timesteps: usize) -> Windows {
    let t = timesteps.max(1);
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by_key(|&i| events[i].timestamp);
    let mut per_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in order {
        per_user.entry(events[i].user.as_str()).or_default().push(i);
    }
    let users: Vec<_> = per_user.keys().map(|u| alloc::string::String::from(*u)).collect();
    let mut keyed = Vec::new();
    for (u, idx) in per_user.values().enumerate() {
        for (c, chunk) in idx.chunks(t).enumerate() {
            let target = idx.get((c + 1) * t).copied();
            let last = *chunk.last().expect("non-empty chunk");
            keyed.push((
                (events[last].timestamp, u, c),
                Window {
                    user: u,
                    events: chunk.to_vec(),
                    target,
                },
            ));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    Windows {
        users,
        windows: keyed.into_iter().map(|(_, w)| w).collect(),
    }
}

/// Greedy batches in window order: a batch closes when full or when the next
/// window's user already has a window in it.
pub fn build_batches(windows: &[Window], batch_size: usize) -> Vec<Vec<usize>> {
    let cap = batch_size.max(1);
    let mut batches = Vec::new();
    let mut cur = Vec::new();
    let mut users = BTreeSet::new();
    for (i, w) in windows.iter().enumerate() {
        if cur.len() == cap || users.contains(&w.user) {
            batches.push(core::mem::take(&mut cur));
            users.clear();
        }
        users.insert(w.user);
        cur.push(i);
    }
    if !cur.is_empty() {
        batches.push(cur);
    }
    batches
}
