#![allow(dead_code)]

use adsage_core::event::{presets, Event, FeatureSchema, Vocabularies};
use adsage_core::model::EventLayout;
use adsage_core::synthgen::{generate, SynthConfig};

pub struct Indexed {
    pub schema: FeatureSchema,
    pub train: Vec<Event>,
    pub test: Vec<Event>,
    pub layout: EventLayout,
}

/// Generates `cfg` and indexes both periods against the training vocabulary.
pub fn indexed(cfg: &SynthConfig) -> Indexed {
    let out = generate(cfg).unwrap();
    let schema = if cfg.email { presets::synthetic_email() } else { presets::synthetic_logon() };
    let vocabs = Vocabularies::build(&out.train, &schema, None).unwrap();
    let train = vocabs.index_all(&out.train, &schema, None).unwrap();
    let test = vocabs.index_all(&out.test, &schema, None).unwrap();
    let layout = EventLayout::new(&schema, &vocabs);
    Indexed { schema, train, test, layout }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
