//! Emotion-aware prosodic phrase-break prediction.
//!
//! The crate covers the whole pipeline:
//!
//! * [`corpus`]: forced-alignment ingestion, silence-based break labels,
//!   JSONL persistence and a synthetic emotion-conditioned corpus generator.
//! * [`analysis`]: simple matching coefficient (SMC) between break sequences
//!   of parallel texts, aggregated into an emotion × emotion matrix.
//! * [`model`]: the emotion-conditioned tagger (text encoder, emotion
//!   predictor, fusion, BiLSTM decoder) and its comparison variants.
//! * [`training`]: joint loss, Adam with global-norm clipping, best-on-validation
//!   checkpointing and a finite-difference gradient checker.
//! * [`evaluation`]: break-class precision/recall/F1, the multi-system
//!   comparison harness and break annotation for TTS input.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod training;

pub use error::{Error, Result};
