use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::nn::LstmState;

/// Current recurrent state of every user. Users never written read as the
/// zero state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStateStore {
    hidden_dim: usize,
    states: BTreeMap<String, LstmState>,
}

impl UserStateStore {
    pub fn new(hidden_dim: usize) -> Self {
        Self {
            hidden_dim,
            states: BTreeMap::new(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn get(&self, user: &str) -> LstmState {
        self.states
            .get(user)
            .cloned()
            .unwrap_or_else(|| LstmState::zeros(self.hidden_dim))
    }

    pub fn set(&mut self, user: &str, state: LstmState) {
        debug_assert_eq!(state.h.len(), self.hidden_dim);
        match self.states.get_mut(user) {
            Some(s) => *s = state,
            None => {
                self.states.insert(user.into(), state);
            }
        }
    }

    /// Every user back to the zero state.
    pub fn reset(&mut self) {
        self.states.clear();
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.states.keys().map(String::as_str)
    }
}
