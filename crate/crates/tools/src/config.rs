//! Run configuration files. Every key is optional; command-line flags take
//! precedence over the file, and the file over built-in defaults.

use std::path::Path;

use adsage_core::adsage::AdsageConfig;
use adsage_core::eval::Aggregation;
use adsage_core::seq2one::Seq2oneConfig;
use adsage_core::synthgen::{PlannedAnomaly, SynthConfig};
use serde::Deserialize;

use crate::error::{ToolError, ToolResult};

/// Starting point for hyperparameters before overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full-scale settings.
    #[default]
    Paper,
    /// Small settings for the synthetic fixtures.
    Desk,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub profile: Option<Profile>,

    pub user_sample_rate: Option<f64>,
    pub exclude_malicious: Option<bool>,
    pub max_reject_fraction: Option<f64>,
    pub word_vector_limit: Option<usize>,

    pub timesteps: Option<usize>,
    pub hidden_units: Option<usize>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub embedding_dim: Option<usize>,
    pub dropout: Option<f64>,
    pub negatives_per_positive: Option<f64>,
    pub ffnn_layers: Option<Vec<usize>>,
    pub clip_norm: Option<f64>,

    pub k_max: Option<usize>,
    pub step: Option<usize>,
    pub budgets: Option<Vec<usize>>,
    pub aggregation: Option<Aggregation>,

    pub users: Option<usize>,
    pub destinations: Option<usize>,
    pub train_days: Option<usize>,
    pub test_days: Option<usize>,
    pub events_per_day: Option<f64>,
    pub affinity: Option<f64>,
    pub pool_size: Option<usize>,
    pub email: Option<bool>,
    #[serde(rename = "anomaly")]
    pub anomalies: Option<Vec<PlannedAnomaly>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> ToolResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ToolError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ToolError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Model hyperparameters settable from the file or the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOverrides {
    pub profile: Option<Profile>,
    pub timesteps: Option<usize>,
    pub hidden_units: Option<usize>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub dropout: Option<f64>,
    pub negatives_per_positive: Option<f64>,
    pub ffnn_layers: Option<Vec<usize>>,
    pub clip_norm: Option<f64>,
}

impl ModelOverrides {
    /// `self` wins over `file` key by key.
    pub fn or_file(self, file: &FileConfig) -> Self {
        Self {
            profile: self.profile.or(file.profile),
            timesteps: self.timesteps.or(file.timesteps),
            hidden_units: self.hidden_units.or(file.hidden_units),
            batch_size: self.batch_size.or(file.batch_size),
            epochs: self.epochs.or(file.epochs),
            learning_rate: self.learning_rate.or(file.learning_rate),
            dropout: self.dropout.or(file.dropout),
            negatives_per_positive: self.negatives_per_positive.or(file.negatives_per_positive),
            ffnn_layers: self.ffnn_layers.or_else(|| file.ffnn_layers.clone()),
            clip_norm: self.clip_norm.or(file.clip_norm),
        }
    }

    fn clip(&self, default: Option<f64>) -> Option<f64> {
        match self.clip_norm {
            Some(c) if c <= 0.0 => None,
            Some(c) => Some(c),
            None => default,
        }
    }

    pub fn adsage(&self, seed: u64) -> AdsageConfig {
        let base = match self.profile.unwrap_or_default() {
            Profile::Paper => AdsageConfig::default(),
            Profile::Desk => AdsageConfig::desk(),
        };
        AdsageConfig {
            hidden_units: self.hidden_units.unwrap_or(base.hidden_units),
            timesteps: self.timesteps.unwrap_or(base.timesteps),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            ffnn_layers: self.ffnn_layers.clone().unwrap_or(base.ffnn_layers),
            dropout: self.dropout.unwrap_or(base.dropout),
            negatives_per_positive: self.negatives_per_positive.unwrap_or(base.negatives_per_positive),
            clip_norm: self.clip(base.clip_norm),
            seed,
        }
    }

    pub fn seq2one(&self, seed: u64) -> Seq2oneConfig {
        let base = match self.profile.unwrap_or_default() {
            Profile::Paper => Seq2oneConfig::default(),
            Profile::Desk => Seq2oneConfig::desk(),
        };
        Seq2oneConfig {
            hidden_units: self.hidden_units.unwrap_or(base.hidden_units),
            timesteps: self.timesteps.unwrap_or(base.timesteps),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            clip_norm: self.clip(base.clip_norm),
            seed,
        }
    }
}

/// Generator settings settable from the file or the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthOverrides {
    pub users: Option<usize>,
    pub destinations: Option<usize>,
    pub train_days: Option<usize>,
    pub test_days: Option<usize>,
    pub events_per_day: Option<f64>,
    pub affinity: Option<f64>,
    pub pool_size: Option<usize>,
    pub email: Option<bool>,
    pub anomalies: Option<Vec<PlannedAnomaly>>,
}

impl SynthOverrides {
    pub fn or_file(self, file: &FileConfig) -> Self {
        Self {
            users: self.users.or(file.users),
            destinations: self.destinations.or(file.destinations),
            train_days: self.train_days.or(file.train_days),
            test_days: self.test_days.or(file.test_days),
            events_per_day: self.events_per_day.or(file.events_per_day),
            affinity: self.affinity.or(file.affinity),
            pool_size: self.pool_size.or(file.pool_size),
            email: self.email.or(file.email),
            anomalies: self.anomalies.or_else(|| file.anomalies.clone()),
        }
    }

    /// Without an explicit plan, the fixture plan of five unseen-destination
    /// user-days is drawn for the final user and day counts.
    pub fn build(&self, seed: u64) -> SynthConfig {
        let d = SynthConfig::default();
        let mut cfg = SynthConfig {
            users: self.users.unwrap_or(d.users),
            destinations: self.destinations.unwrap_or(d.destinations),
            train_days: self.train_days.unwrap_or(d.train_days),
            test_days: self.test_days.unwrap_or(d.test_days),
            events_per_day: self.events_per_day.unwrap_or(d.events_per_day),
            affinity: self.affinity.unwrap_or(d.affinity),
            pool_size: self.pool_size.unwrap_or(d.pool_size),
            email: self.email.unwrap_or(d.email),
            seed,
            ..d
        };
        cfg.anomalies = match &self.anomalies {
            Some(a) => a.clone(),
            None => SynthConfig::fixture_plan(seed, cfg.users, cfg.test_days),
        };
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("seed = 3\nepochs = 7\nhidden_units = 9\nprofile = \"desk\"\n").unwrap();
        let cli = ModelOverrides {
            epochs: Some(2),
            ..ModelOverrides::default()
        };
        let cfg = cli.or_file(&file).adsage(file.seed.unwrap());
        assert_eq!(cfg.epochs, 2);
        assert_eq!(cfg.hidden_units, 9);
        assert_eq!(cfg.batch_size, AdsageConfig::desk().batch_size);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(FileConfig::parse("epochz = 1\n").is_err());
    }

    #[test]
    fn anomaly_tables() {
        let file = FileConfig::parse(
            "[[anomaly]]\nuser = 1\nday = 2\nkind = \"off_hours\"\nevents = 3\nscenario = \"night\"\n",
        )
        .unwrap();
        let cfg = SynthOverrides::default().or_file(&file).build(0);
        assert_eq!(cfg.anomalies.len(), 1);
        assert_eq!(cfg.anomalies[0].scenario, "night");
    }

    #[test]
    fn default_plan_is_the_fixture() {
        let cfg = SynthOverrides::default().build(4);
        assert_eq!(cfg, SynthConfig::fixture(4));
    }

    #[test]
    fn non_positive_clip_disables_clipping() {
        let m = ModelOverrides {
            clip_norm: Some(0.0),
            ..ModelOverrides::default()
        };
        assert_eq!(m.adsage(0).clip_norm, None);
    }
}
