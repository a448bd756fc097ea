//! Inference-time unlearning for reasoning models.
//!
//! A guard sits between a token model and its sampler. Queries the scope
//! classifier judges to be about forgotten subjects get a forbidden-phrase
//! lexicon built from the closest forget record; decoding then penalizes
//! tokens near those phrases and blocks any token that would complete one.
//! Candidate trajectories that still look sensitive are regenerated with a
//! grown lexicon or replaced by a refusal.

pub mod config;
pub mod corpus;
mod error;
pub mod evaluation;
pub mod lexicon;
pub mod semantics;
pub mod suppression;
pub mod text_model;
pub mod trajectory;

pub use error::{Error, Result};
