//! Joint detector: a recurrent next-event predictor whose per-user state
//! conditions a feed-forward edge-validity classifier trained against
//! negative edges.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ScoredEvent;
use crate::event::Event;
use crate::model::{
    build_batches, build_windows, check_sequence_config, component_rng, streams, Encoder, EpochStats, EventLayout,
    SequenceNet, TrainEvent, TrainObserver, UserStateStore, Windows,
};
use crate::negsample::{sample_negative, ObservedEdgeMap, SamplerConfig};
use crate::nn::loss::binary_cross_entropy;
use crate::nn::{FfnnParams, OptimizerState, Param, Parameterized};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdsageConfig {
    pub hidden_units: usize,
    pub timesteps: usize,
    /// Windows per batch.
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub ffnn_layers: Vec<usize>,
    pub dropout: f64,
    pub negatives_per_positive: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for AdsageConfig {
    fn default() -> Self {
        Self {
            hidden_units: 30,
            timesteps: 15,
            batch_size: 100,
            epochs: 10,
            learning_rate: 0.001,
            ffnn_layers: vec![50, 30, 10],
            dropout: 0.2,
            negatives_per_positive: 1.0,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl AdsageConfig {
    /// Settings for the small synthetic fixtures: fewer units, small
    /// batches and a larger learning rate than the full-scale defaults.
    pub fn desk() -> Self {
        Self {
            hidden_units: 16,
            batch_size: 20,
            epochs: 20,
            learning_rate: 0.01,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_sequence_config(self.hidden_units, self.timesteps, self.batch_size, self.learning_rate)?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(alloc::format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.ffnn_layers.contains(&0) {
            return Err(Error::Config("ffnn layer widths must be positive".into()));
        }
        self.sampler().validate()
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            negatives_per_positive: self.negatives_per_positive,
            seed: self.seed,
        }
    }

    fn optimizer(&self) -> OptimizerState {
        OptimizerState::new(self.learning_rate).with_clip_norm(self.clip_norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdsageModel {
    pub config: AdsageConfig,
    pub net: SequenceNet,
    pub ffnn: FfnnParams,
    pub ffnn_optimizer: OptimizerState,
    pub rnn_optimizer: OptimizerState,
    pub history: Vec<EpochStats>,
}

/// Parameters updated by the classifier step.
struct FfnnView<'a> {
    encoder: &'a mut Encoder,
    ffnn: &'a mut FfnnParams,
}

impl Parameterized for FfnnView<'_> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.encoder.visit_params(f);
        self.ffnn.visit_params(f);
    }
}

struct Candidate {
    input: Vec<f64>,
    event: Option<Event>,
    window_event: usize,
    invalid: bool,
}

impl AdsageModel {
    /// Freshly initialised model; its classifier output layer is zero so
    /// every score is 0.5.
    pub fn new(layout: EventLayout, config: AdsageConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = component_rng(config.seed, streams::INIT);
        let net = SequenceNet::new(layout, config.hidden_units, &mut rng);
        let ffnn = FfnnParams::new(
            net.encoder.len() + config.hidden_units,
            &config.ffnn_layers,
            config.dropout,
            &mut rng,
        )?;
        Ok(Self {
            ffnn_optimizer: config.optimizer(),
            rnn_optimizer: config.optimizer(),
            config,
            net,
            ffnn,
            history: Vec::new(),
        })
    }

    /// Trains on chronologically ordered true events; negatives are drawn
    /// against the destinations observed in `train`.
    pub fn train(
        train: &[Event],
        layout: EventLayout,
        config: AdsageConfig,
        observer: &mut dyn TrainObserver,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let map = ObservedEdgeMap::build(train, &layout.destination_spaces);
        let mut model = Self::new(layout, config)?;
        model.fit(train, &map, observer)?;
        Ok(model)
    }

    pub fn fit(&mut self, train: &[Event], map: &ObservedEdgeMap, observer: &mut dyn TrainObserver) -> Result<()> {
        let windows = build_windows(train, self.config.timesteps);
        let batches = build_batches(&windows.windows, self.config.batch_size);
        let mut neg_rng = component_rng(self.config.seed, streams::NEGATIVES);
        let mut drop_rng = component_rng(self.config.seed, streams::DROPOUT);
        let mut store = UserStateStore::new(self.config.hidden_units);
        for epoch in 0..self.config.epochs {
            store.reset();
            observer.notify(TrainEvent::EpochStart { epoch });
            let mut stats = EpochStats {
                epoch,
                ffnn_loss: None,
                rnn_loss: None,
                ffnn_learning_rate: Some(self.ffnn_optimizer.learning_rate),
                rnn_learning_rate: self.rnn_optimizer.learning_rate,
                negatives: 0,
                skipped_negatives: 0,
            };
            let (mut f_sum, mut f_n, mut r_sum, mut r_n) = (0.0, 0usize, 0.0, 0usize);
            for (b, batch) in batches.iter().enumerate() {
                observer.notify(TrainEvent::FfnnStep { batch: b });
                let (l, n) = self.ffnn_step(train, &windows, batch, &store, map, &mut neg_rng, &mut drop_rng, &mut stats)?;
                f_sum += l;
                f_n += n;
                observer.notify(TrainEvent::RnnStep { batch: b });
                let (l, n) = self
                    .net
                    .batch_step(&mut self.rnn_optimizer, train, &windows, batch, &mut store, observer)?;
                r_sum += l;
                r_n += n;
            }
            stats.ffnn_loss = (f_n > 0).then(|| f_sum / f_n as f64);
            stats.rnn_loss = (r_n > 0).then(|| r_sum / r_n as f64);
            if let Some(l) = stats.ffnn_loss {
                self.ffnn_optimizer.end_epoch(l);
            }
            if let Some(l) = stats.rnn_loss {
                self.rnn_optimizer.end_epoch(l);
            }
            log::info!(
                "epoch {epoch}: ffnn loss {:?}, rnn loss {:?}, negatives {} (skipped {})",
                stats.ffnn_loss,
                stats.rnn_loss,
                stats.negatives,
                stats.skipped_negatives
            );
            self.history.push(stats);
            observer.notify(TrainEvent::EpochEnd(&stats));
        }
        Ok(())
    }

    /// Classifier update. The states feeding the classifier come from a
    /// gradient-free pass of the current RNN from each user's stored state,
    /// so they act as constants here.
    #[allow(clippy::too_many_arguments)]
    fn ffnn_step(
        &mut self,
        events: &[Event],
        windows: &Windows,
        batch: &[usize],
        store: &UserStateStore,
        map: &ObservedEdgeMap,
        neg_rng: &mut rand_chacha::ChaCha8Rng,
        drop_rng: &mut rand_chacha::ChaCha8Rng,
        stats: &mut EpochStats,
    ) -> Result<(f64, usize)> {
        let sampler = self.config.sampler();
        let enc_len = self.net.encoder.len();
        let mut candidates = Vec::new();
        for &w in batch {
            let window = &windows.windows[w];
            let mut state = store.get(&windows.users[window.user]);
            for &i in &window.events {
                let ev = &events[i];
                let x = self.net.encoder.encode(ev)?;
                let mut input = x.clone();
                input.extend_from_slice(&state.h);
                candidates.push(Candidate {
                    input,
                    event: None,
                    window_event: i,
                    invalid: false,
                });
                for _ in 0..sampler.draw_count(neg_rng) {
                    match sample_negative(ev, map, neg_rng) {
                        Some(neg) => {
                            stats.negatives += 1;
                            let mut neg_input = self.net.encoder.encode(&neg)?;
                            neg_input.extend_from_slice(&state.h);
                            candidates.push(Candidate {
                                input: neg_input,
                                event: Some(neg),
                                window_event: i,
                                invalid: true,
                            });
                        }
                        None => stats.skipped_negatives += 1,
                    }
                }
                state = self.net.lstm.step(&x, &state)?;
            }
        }
        if candidates.is_empty() {
            return Ok((0.0, 0));
        }
        let weight = 1.0 / candidates.len() as f64;
        self.net.encoder.zero_grad();
        self.ffnn.zero_grad();
        let mut total = 0.0;
        for c in &candidates {
            let cache = self.ffnn.forward_cached(&c.input, true, drop_rng)?;
            let (loss, dz) = binary_cross_entropy(cache.logit, if c.invalid { 1.0 } else { 0.0 });
            total += loss;
            let dinput = self.ffnn.backward(&cache, dz * weight);
            let ev = c.event.as_ref().unwrap_or(&events[c.window_event]);
            self.net.encoder.backward(ev, &dinput[..enc_len]);
        }
        let mut view = FfnnView {
            encoder: &mut self.net.encoder,
            ffnn: &mut self.ffnn,
        };
        self.ffnn_optimizer.step(&mut view)?;
        Ok((total, candidates.len()))
    }

    /// Probability that `event` is an invalid edge given the user's state.
    /// Does not advance the state.
    pub fn event_score(&self, event: &Event, store: &UserStateStore) -> Result<f64> {
        let mut input = self.net.encoder.encode(event)?;
        input.extend_from_slice(&store.get(&event.user).h);
        self.ffnn.predict(&input)
    }

    /// Scores events in order, advancing each user's state after its event.
    pub fn score(&self, events: &[Event], store: &mut UserStateStore) -> Result<Vec<ScoredEvent>> {
        let mut out = Vec::with_capacity(events.len());
        for ev in events {
            let state = store.get(&ev.user);
            let x = self.net.encoder.encode(ev)?;
            let mut input = x.clone();
            input.extend_from_slice(&state.h);
            let score = self.ffnn.predict(&input)?;
            store.set(&ev.user, self.net.lstm.step(&x, &state)?);
            out.push(ScoredEvent::from_event(ev, score));
        }
        Ok(out)
    }

    /// Runs the RNN over `events` without scoring, e.g. the training period
    /// before scoring the test period.
    pub fn warm_up(&self, events: &[Event], store: &mut UserStateStore) -> Result<()> {
        warm_up(&self.net, events, store)
    }

    pub fn new_store(&self) -> UserStateStore {
        UserStateStore::new(self.config.hidden_units)
    }
}

pub(crate) fn warm_up(net: &SequenceNet, events: &[Event], store: &mut UserStateStore) -> Result<()> {
    for ev in events {
        let s = net.advance(ev, &store.get(&ev.user))?;
        store.set(&ev.user, s);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Label;
    use alloc::string::String;

    fn layout() -> EventLayout {
        EventLayout {
            space_dims: vec![3, 3],
            space_sizes: vec![4, 6],
            source_space: 0,
            destination_spaces: vec![1],
            numerics: 0,
            categorical_sizes: vec![3],
            texts: 0,
            text_dim: 0,
        }
    }

    fn ev(user: &str, src: u32, dst: u32, ts: i64) -> Event {
        Event {
            key: ts as u64,
            timestamp: ts,
            user: user.into(),
            source: src,
            destinations: vec![vec![dst]],
            numerics: vec![],
            categoricals: vec![1],
            texts: vec![],
            label: Label::Normal,
        }
    }

    fn small() -> AdsageConfig {
        AdsageConfig {
            hidden_units: 4,
            timesteps: 3,
            batch_size: 4,
            epochs: 2,
            learning_rate: 0.01,
            ffnn_layers: vec![6],
            dropout: 0.1,
            ..AdsageConfig::default()
        }
    }

    fn stream() -> Vec<Event> {
        let mut v = Vec::new();
        for t in 0..12 {
            v.push(ev("A", 1, 1 + (t % 2) as u32, 100 * t));
            v.push(ev("B", 2, 3, 100 * t + 50));
        }
        v
    }

    #[test]
    fn untrained_scores_one_half() {
        let m = AdsageModel::new(layout(), small()).unwrap();
        let mut store = m.new_store();
        for s in m.score(&stream(), &mut store).unwrap() {
            assert_eq!(s.score, 0.5);
        }
        let cfg = AdsageConfig { epochs: 0, ..small() };
        let zero = AdsageModel::train(&stream(), layout(), cfg.clone(), &mut crate::model::Silent).unwrap();
        assert_eq!(zero, AdsageModel::new(layout(), cfg).unwrap());
    }

    #[test]
    fn ffnn_precedes_rnn_and_only_rnn_writes_states() {
        let mut log: Vec<String> = Vec::new();
        let mut obs = |e: TrainEvent<'_>| match e {
            TrainEvent::FfnnStep { batch } => log.push(alloc::format!("F{batch}")),
            TrainEvent::RnnStep { batch } => log.push(alloc::format!("R{batch}")),
            TrainEvent::StateWrite { .. } => log.push("W".into()),
            TrainEvent::EpochStart { .. } => log.push("E".into()),
            TrainEvent::EpochEnd(_) => {}
        };
        AdsageModel::train(&stream(), layout(), small(), &mut obs).unwrap();
        let mut phase = ' ';
        for entry in &log {
            match entry.as_bytes()[0] {
                b'W' => assert_eq!(phase, 'R', "state write outside the rnn step"),
                b'F' => {
                    assert!(phase != 'F');
                    phase = 'F'
                }
                b'R' => {
                    assert_eq!(phase, 'F');
                    phase = 'R'
                }
                _ => phase = ' ',
            }
        }
        assert!(log.iter().any(|e| e == "W"));
    }

    #[test]
    fn training_is_deterministic() {
        let a = AdsageModel::train(&stream(), layout(), small(), &mut crate::model::Silent).unwrap();
        let b = AdsageModel::train(&stream(), layout(), small(), &mut crate::model::Silent).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 2);
    }

    #[test]
    fn state_isolation_under_interleaving() {
        let m = AdsageModel::train(&stream(), layout(), small(), &mut crate::model::Silent).unwrap();
        let only_a: Vec<_> = stream().into_iter().filter(|e| e.user == "A").collect();
        let mixed = m.score(&stream(), &mut m.new_store()).unwrap();
        let alone = m.score(&only_a, &mut m.new_store()).unwrap();
        let mixed_a: Vec<f64> = mixed.iter().filter(|s| s.user == "A").map(|s| s.score).collect();
        let alone_a: Vec<f64> = alone.iter().map(|s| s.score).collect();
        assert_eq!(mixed_a, alone_a);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert_eq!(
            AdsageModel::train(&[], layout(), small(), &mut crate::model::Silent),
            Err(Error::EmptyTrainingSet)
        );
    }

    #[test]
    fn invalid_config() {
        let c = AdsageConfig { dropout: 1.0, ..small() };
        assert!(AdsageModel::new(layout(), c).is_err());
    }
}
