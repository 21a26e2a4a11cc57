//! Personalized, intent-aware search ranking.

pub mod combiner;
pub mod components;
pub mod context;
pub mod corpus;
pub mod defaults;
pub mod engine;
pub mod error;
pub mod eval;
pub mod index;
pub mod intent;
pub mod records;
pub mod synth;
pub mod tokenize;
pub mod tuner;

pub use context::QueryContext;
pub use error::{Error, Result};
