//! Latent-noise auditing and robust span-based NER training for distantly
//! supervised corpora.
//!
//! The crate covers the whole pipeline: reading CoNLL corpora, measuring
//! observed-vs-gold transition matrices, synthetic masking, the span
//! classifier, reliable/confident negative selection, noisy-positive
//! elimination, confident-learning prune strategies, evaluation metrics and
//! alignment of LLM-produced annotations.

pub mod corpus;
pub mod error;
pub mod llm_ingest;
pub mod metrics;
pub mod noise_lab;
pub mod rng;
pub mod selection;
pub mod span_model;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
