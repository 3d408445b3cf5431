//! Data layer for desktop interaction recordings.
//!
//! - [`events`]: event types and pre-tokenization stream transforms
//! - [`container`]: chunked, indexed, crash-safe event log with media references
//! - [`codec`]: GOP-structured lossless media store with byte accounting

pub mod codec;
pub mod decode_engine;
pub mod container;
pub mod events;
pub mod fsl;
pub mod metrics;
pub mod synth;
pub mod tokenizer;
