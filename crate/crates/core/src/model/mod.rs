//! Pieces shared by the learned detectors: the event encoder, the recurrent
//! next-event predictor, per-user state and training windows.

pub mod encoder;
pub mod state;
pub mod targets;
pub mod windows;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use encoder::{Encoder, EventLayout};
pub use state::UserStateStore;
pub use targets::{TargetFeature, TargetLayout};
pub use windows::{build_batches, build_windows, Window, Windows};

use crate::error::Result;
use crate::event::Event;
use crate::nn::{Dense, LstmParams, LstmState, OptimizerState, Param, Parameterized};

/// Independent generator for one consumer of the run seed.
pub fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sub-seed streams derived from one run seed.
pub mod streams {
    pub const SYNTH: u64 = 0;
    pub const INIT: u64 = 1;
    pub const NEGATIVES: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const USER_SAMPLE: u64 = 4;
    pub const GRADCHECK: u64 = 5;
    pub const FIXTURE_PLAN: u64 = 7;
}

/// Encoder, LSTM and the linear heads predicting the next event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceNet {
    pub encoder: Encoder,
    pub lstm: LstmParams,
    pub heads: Dense,
    pub targets: TargetLayout,
}

impl SequenceNet {
    pub fn new<R: rand::Rng + ?Sized>(layout: EventLayout, hidden: usize, rng: &mut R) -> Self {
        let encoder = Encoder::new(layout, rng);
        let lstm = LstmParams::new(encoder.len(), hidden, rng);
        let targets = TargetLayout::new(&encoder);
        let heads = Dense::new(hidden, targets.len, rng);
        Self {
            encoder,
            lstm,
            heads,
            targets,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim()
    }

    pub fn predict(&self, state: &LstmState) -> Result<Vec<f64>> {
        self.heads.forward(&state.h)
    }

    pub fn advance(&self, event: &Event, state: &LstmState) -> Result<LstmState> {
        self.lstm.step(&self.encoder.encode(event)?, state)
    }

    /// Forward over one window from `state`, loss on the window's target and
    /// backpropagation through the window, with gradients scaled by `weight`.
    /// Returns the end state and the unweighted loss when there is a target.
    pub fn window_step(
        &mut self,
        events: &[Event],
        window: &Window,
        state: &LstmState,
        weight: f64,
    ) -> Result<(LstmState, Option<f64>)> {
        let inputs = window
            .events
            .iter()
            .map(|&i| self.encoder.encode(&events[i]))
            .collect::<Result<Vec<_>>>()?;
        let (end, caches) = self.lstm.forward_window(&inputs, state)?;
        let Some(t) = window.target else {
            return Ok((end, None));
        };
        let pred = self.heads.forward(&end.h)?;
        let (loss, mut grad) = targets::next_event_loss(&self.targets, &self.encoder, &pred, &events[t])?;
        grad.iter_mut().for_each(|g| *g *= weight);
        let dh = self.heads.backward(&end.h, &grad);
        let dxs = self.lstm.backward_window(&caches, &dh);
        for (&i, dx) in window.events.iter().zip(&dxs) {
            self.encoder.backward(&events[i], dx);
        }
        Ok((end, Some(loss)))
    }

    /// One RNN update over a batch of windows. Reads each user's state from
    /// `store` and writes back the state at the end of the window.
    pub(crate) fn batch_step(
        &mut self,
        optimizer: &mut OptimizerState,
        events: &[Event],
        windows: &Windows,
        batch: &[usize],
        store: &mut UserStateStore,
        observer: &mut dyn TrainObserver,
    ) -> Result<(f64, usize)> {
        let n = batch.iter().filter(|&&w| windows.windows[w].target.is_some()).count();
        let weight = if n > 0 { 1.0 / n as f64 } else { 0.0 };
        self.zero_grad();
        let mut total = 0.0;
        for &w in batch {
            let window = &windows.windows[w];
            let user = &windows.users[window.user];
            let (end, loss) = self.window_step(events, window, &store.get(user), weight)?;
            total += loss.unwrap_or(0.0);
            store.set(user, end);
            observer.notify(TrainEvent::StateWrite { user });
        }
        if n > 0 {
            optimizer.step(self)?;
        }
        Ok((total, n))
    }
}

impl Parameterized for SequenceNet {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.encoder.visit_params(f);
        self.lstm.visit_params(f);
        self.heads.visit_params(f);
    }
}

/// Progress of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean binary cross-entropy over all candidate events.
    pub ffnn_loss: Option<f64>,
    /// Mean next-event loss over windows with a target.
    pub rnn_loss: Option<f64>,
    pub ffnn_learning_rate: Option<f64>,
    pub rnn_learning_rate: f64,
    pub negatives: u64,
    pub skipped_negatives: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainEvent<'a> {
    EpochStart { epoch: usize },
    FfnnStep { batch: usize },
    RnnStep { batch: usize },
    StateWrite { user: &'a str },
    EpochEnd(&'a EpochStats),
}

/// Receives training milestones; used for progress logs and to check step
/// ordering in tests.
pub trait TrainObserver {
    fn notify(&mut self, event: TrainEvent<'_>);
}

/// Observer that ignores everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl TrainObserver for Silent {
    fn notify(&mut self, _: TrainEvent<'_>) {}
}

impl<F: FnMut(TrainEvent<'_>)> TrainObserver for F {
    fn notify(&mut self, event: TrainEvent<'_>) {
        self(event)
    }
}

/// Checks shared by both learned detectors.
pub(crate) fn check_sequence_config(hidden: usize, timesteps: usize, batch_size: usize, learning_rate: f64) -> Result<()> {
    use crate::error::Error;
    if hidden == 0 || timesteps == 0 || batch_size == 0 {
        return Err(Error::Config("hidden units, timesteps and batch size must be positive".into()));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::Config(alloc::format!("learning rate must be positive, got {learning_rate}")));
    }
    Ok(())
}
