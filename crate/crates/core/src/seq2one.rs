//! Next-event prediction baseline: per-feature prediction errors are turned
//! into quantiles of the training-period errors and averaged.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ScoredEvent;
use crate::event::Event;
use crate::model::targets::feature_errors;
use crate::model::{
    build_batches, build_windows, check_sequence_config, component_rng, streams, EpochStats, EventLayout,
    SequenceNet, TrainEvent, TrainObserver, UserStateStore,
};
use crate::nn::OptimizerState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seq2oneConfig {
    pub hidden_units: usize,
    pub timesteps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for Seq2oneConfig {
    fn default() -> Self {
        Self {
            hidden_units: 30,
            timesteps: 15,
            batch_size: 100,
            epochs: 10,
            learning_rate: 0.001,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl Seq2oneConfig {
    /// Settings for the small synthetic fixtures.
    pub fn desk() -> Self {
        Self {
            hidden_units: 16,
            batch_size: 20,
            epochs: 10,
            learning_rate: 0.01,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_sequence_config(self.hidden_units, self.timesteps, self.batch_size, self.learning_rate)
    }
}

/// Fraction of reference values not above `error`.
pub fn quantile_normalize(error: f64, reference: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Config("empty quantile reference".into()));
    }
    let below = reference.partition_point(|&v| v <= error);
    Ok(below as f64 / reference.len() as f64)
}

/// Sorted training-period errors of every predicted feature.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantileReference {
    pub features: Vec<Vec<f64>>,
}

impl QuantileReference {
    /// A feature is usable when its reference holds at least two distinct
    /// values; a constant error carries no ranking information.
    pub fn is_informative(&self, feature: usize) -> bool {
        let r = &self.features[feature];
        r.len() >= 2 && r[0] < r[r.len() - 1]
    }
}

/// Score of one event with its per-feature quantiles (`None` where the
/// feature was unscorable or uninformative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores {
    pub quantiles: Vec<Option<f64>>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2oneModel {
    pub config: Seq2oneConfig,
    pub net: SequenceNet,
    pub optimizer: OptimizerState,
    pub reference: QuantileReference,
    pub history: Vec<EpochStats>,
}

impl Seq2oneModel {
    pub fn new(layout: EventLayout, config: Seq2oneConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = component_rng(config.seed, streams::INIT);
        let net = SequenceNet::new(layout, config.hidden_units, &mut rng);
        Ok(Self {
            optimizer: OptimizerState::new(config.learning_rate).with_clip_norm(config.clip_norm),
            config,
            net,
            reference: QuantileReference::default(),
            history: Vec::new(),
        })
    }

    /// Trains the predictor on windows of true events, then builds the
    /// quantile reference with the frozen model over the same events.
    pub fn train(
        train: &[Event],
        layout: EventLayout,
        config: Seq2oneConfig,
        observer: &mut dyn TrainObserver,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut model = Self::new(layout, config)?;
        let windows = build_windows(train, model.config.timesteps);
        let batches = build_batches(&windows.windows, model.config.batch_size);
        let mut store = UserStateStore::new(model.config.hidden_units);
        for epoch in 0..model.config.epochs {
            store.reset();
            observer.notify(TrainEvent::EpochStart { epoch });
            let (mut sum, mut n) = (0.0, 0usize);
            for (b, batch) in batches.iter().enumerate() {
                observer.notify(TrainEvent::RnnStep { batch: b });
                let (l, k) = model
                    .net
                    .batch_step(&mut model.optimizer, train, &windows, batch, &mut store, observer)?;
                sum += l;
                n += k;
            }
            let stats = EpochStats {
                epoch,
                ffnn_loss: None,
                rnn_loss: (n > 0).then(|| sum / n as f64),
                ffnn_learning_rate: None,
                rnn_learning_rate: model.optimizer.learning_rate,
                negatives: 0,
                skipped_negatives: 0,
            };
            if let Some(l) = stats.rnn_loss {
                model.optimizer.end_epoch(l);
            }
            log::info!("epoch {epoch}: rnn loss {:?}", stats.rnn_loss);
            model.history.push(stats);
            observer.notify(TrainEvent::EpochEnd(&stats));
        }
        model.reference = model.build_reference(train)?;
        Ok(model)
    }

    /// Per-feature errors of every event, predicted from the user's state
    /// before it.
    fn errors(&self, events: &[Event], store: &mut UserStateStore) -> Result<Vec<Vec<Option<f64>>>> {
        let mut out = Vec::with_capacity(events.len());
        for ev in events {
            let state = store.get(&ev.user);
            let pred = self.net.predict(&state)?;
            out.push(feature_errors(&self.net.targets, &self.net.encoder, &pred, ev));
            store.set(&ev.user, self.net.advance(ev, &state)?);
        }
        Ok(out)
    }

    pub fn build_reference(&self, train: &[Event]) -> Result<QuantileReference> {
        let mut store = UserStateStore::new(self.config.hidden_units);
        let errors = self.errors(train, &mut store)?;
        let mut features = vec![Vec::new(); self.net.targets.feature_count()];
        for row in errors {
            for (f, e) in features.iter_mut().zip(row) {
                if let Some(e) = e {
                    f.push(e);
                }
            }
        }
        for f in &mut features {
            f.sort_by(f64::total_cmp);
        }
        Ok(QuantileReference { features })
    }

    fn combine(&self, errors: Vec<Option<f64>>) -> Result<FeatureScores> {
        let mut quantiles = Vec::with_capacity(errors.len());
        let (mut sum, mut n) = (0.0, 0usize);
        for (f, e) in errors.into_iter().enumerate() {
            let q = match e {
                Some(e) if self.reference.is_informative(f) => {
                    let q = quantile_normalize(e, &self.reference.features[f])?;
                    sum += q;
                    n += 1;
                    Some(q)
                }
                _ => None,
            };
            quantiles.push(q);
        }
        Ok(FeatureScores {
            quantiles,
            score: if n > 0 { sum / n as f64 } else { 0.0 },
        })
    }

    /// Scores events in order with per-feature detail, advancing states.
    pub fn score_detailed(&self, events: &[Event], store: &mut UserStateStore) -> Result<Vec<FeatureScores>> {
        self.errors(events, store)?
            .into_iter()
            .map(|e| self.combine(e))
            .collect()
    }

    pub fn score(&self, events: &[Event], store: &mut UserStateStore) -> Result<Vec<ScoredEvent>> {
        let detailed = self.score_detailed(events, store)?;
        Ok(events
            .iter()
            .zip(detailed)
            .map(|(e, d)| ScoredEvent::from_event(e, d.score))
            .collect())
    }

    pub fn warm_up(&self, events: &[Event], store: &mut UserStateStore) -> Result<()> {
        crate::adsage::warm_up(&self.net, events, store)
    }

    pub fn new_store(&self) -> UserStateStore {
        UserStateStore::new(self.config.hidden_units)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Label;
    use crate::model::Silent;
    use alloc::string::String;

    #[test]
    fn quantiles() {
        let r = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(quantile_normalize(0.25, &r).unwrap(), 0.5);
        assert_eq!(quantile_normalize(5.0, &r).unwrap(), 1.0);
        assert_eq!(quantile_normalize(0.4, &r).unwrap(), 1.0);
        assert_eq!(quantile_normalize(0.0, &r).unwrap(), 0.0);
        assert!(quantile_normalize(0.0, &[]).is_err());
    }

    fn layout() -> EventLayout {
        EventLayout {
            space_dims: vec![3, 3],
            space_sizes: vec![3, 6],
            source_space: 0,
            destination_spaces: vec![1],
            numerics: 1,
            categorical_sizes: vec![3],
            texts: 0,
            text_dim: 0,
        }
    }

    fn stream() -> Vec<Event> {
        (0..60)
            .map(|t| Event {
                key: t as u64,
                timestamp: 1_000 * t + 37 * (t * t % 11),
                user: String::from(if t % 3 == 0 { "A" } else { "B" }),
                source: 1 + (t % 3 != 0) as u32,
                destinations: vec![vec![1 + (t % 5) as u32]],
                numerics: vec![((t * 7) % 13) as f64 / 13.0],
                categoricals: vec![1 + (t % 2) as u32],
                texts: vec![],
                label: Label::Normal,
            })
            .collect()
    }

    fn config(epochs: usize) -> Seq2oneConfig {
        Seq2oneConfig {
            hidden_units: 4,
            timesteps: 4,
            batch_size: 2,
            epochs,
            learning_rate: 0.01,
            ..Seq2oneConfig::default()
        }
    }

    #[test]
    fn untrained_model_still_scores() {
        let m = Seq2oneModel::train(&stream(), layout(), config(0), &mut Silent).unwrap();
        assert!(m.reference.features.iter().all(|f| !f.is_empty()));
        let s = m.score(&stream(), &mut m.new_store()).unwrap();
        assert!(s.iter().all(|e| (0.0..=1.0).contains(&e.score)));
    }

    #[test]
    fn score_is_mean_of_quantiles() {
        let m = Seq2oneModel::train(&stream(), layout(), config(2), &mut Silent).unwrap();
        for d in m.score_detailed(&stream(), &mut m.new_store()).unwrap() {
            let qs: Vec<f64> = d.quantiles.iter().flatten().copied().collect();
            assert_eq!(d.score, qs.iter().sum::<f64>() / qs.len() as f64);
        }
    }

    #[test]
    fn deterministic_reference() {
        let a = Seq2oneModel::train(&stream(), layout(), config(2), &mut Silent).unwrap();
        let b = Seq2oneModel::train(&stream(), layout(), config(2), &mut Silent).unwrap();
        assert_eq!(a.reference, b.reference);
        assert_eq!(a, b);
    }
}
