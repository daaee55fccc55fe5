//! Operation sequence models over word-aligned bitext.
//!
//! The pipeline runs: [`corpus`] loads aligned sentence pairs, [`opgen`]
//! turns each pair into a deterministic sequence of lexical and reordering
//! operations, [`streams`] splits operation sequences into synchronized
//! source/target token streams, and the models in [`ngram`] and [`neural`]
//! score them. [`scorer`] exposes an incremental, decoder-style API on top of
//! either model.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod neural;
pub mod ngram;
pub mod opgen;
pub mod scorer;
pub mod streams;

pub use error::{Error, Result};

/// Sentence-start padding symbol shared by every model.
pub const BOS: &str = "<s>";
/// Sentence-end symbol.
pub const EOS: &str = "</s>";
/// Out-of-vocabulary symbol.
pub const UNK: &str = "<unk>";
