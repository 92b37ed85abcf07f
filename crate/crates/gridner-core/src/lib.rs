//! Core engine for discontinuous named entity recognition: word-pair grid
//! tagging and decoding, a small trainable scoring network with exact
//! gradients, grid-based online triplet mining, and exact-match evaluation.

// index loops mirror the grid/tensor math throughout the numeric code
#![allow(clippy::needless_range_loop)]

pub mod corpus;
pub mod eval;
pub mod fixtures;
pub mod grid;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod trainer;
pub mod triplet;

pub use corpus::{CorpusStats, Dataset, Entity, Sentence};
pub use eval::{MetricReport, SubsetReport};
pub use grid::{DecodeConfig, GridTag, TagGrid};
pub use model::{ForwardTrace, ModelConfig, Parameters, Vocab};
pub use trainer::{TrainConfig, TrainHistory};
pub use triplet::{CandidateSet, Cell, FeatureSource, MiningConfig, MiningStrategy};
