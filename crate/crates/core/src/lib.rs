//! Anomaly detection on streams of attributed edges: audit-log events seen
//! as interactions from a source entity to one or more destinations.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the companion `adsage` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adsage;
pub mod error;
pub mod eval;
pub mod event;
pub mod model;
pub mod negsample;
pub mod nn;
pub mod rules;
pub mod seq2one;
pub mod synthgen;

pub use error::{Error, Result};
