//! Alirector: an alignment-enhanced grammatical error corrector.
//!
//! The crate builds the full desk-scale pipeline around a small
//! character-level sequence corrector:
//!
//! 1. [`corpus`] generates synthetic parallel data with controlled error
//!    injection and performs the corrector/aligner data split.
//! 2. [`correction`] trains the base corrector and produces corpus-wide
//!    initial corrections.
//! 3. [`alignment`] builds `(source, prediction, target)` triples, trains
//!    forward/reverse alignment models over `X [SEP] Y-hat` inputs, and
//!    runs two-stage predict-and-align inference.
//! 4. [`distill`] transfers alignment knowledge back into the corrector
//!    through tempered KL distillation against both frozen teachers.
//! 5. [`eval`] extracts character-level edits, classifies them (M/R/S/W),
//!    and scores systems with precision/recall/F0.5 plus
//!    overcorrection/undercorrection accounting.
//! 6. [`pipeline`] wires the stages into resumable, seeded run directories
//!    behind the `alirector` CLI.
//!
//! Everything is deterministic given the configured seeds: repeating a
//! stage with the same config yields byte-identical metrics files.

pub mod alignment;
pub mod correction;
pub mod corpus;
pub mod distill;
pub mod error;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod train;

pub use error::{Error, Result};

/// Token ids index into a [`corpus::Vocab`]; reserved ids come first.
pub type TokenId = u32;
