//! AI-generated essay detection: corpus cleaning, byte-level BPE, a small
//! transformer encoder trained with Adam, an n-gram perplexity / readability
//! feature track with a logistic baseline, and evaluation.

pub mod corpus;
pub mod error;
pub mod exec;
pub mod features;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod tokenizer;

pub use error::{Error, Result};
pub use exec::Exec;
