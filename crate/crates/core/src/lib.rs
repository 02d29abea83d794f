//! Toolkit for severely low-resource translation data pipelines.
//!
//! * [`corpus`]: line-aligned multilingual text, intersection and splits
//! * [`align`]: EM lexical alignment with fertility/distortion statistics
//! * [`rank`]: FAMD / FAMP source-language ranking and family selection
//! * [`lexicon`]: order-preserving named-entity tagging and decoding
//! * [`datagen`]: complete/star training sets for the three pretraining stages
//! * [`combine`]: cluster-center combination of per-source translations
//! * [`eval`]: corpus and smoothed sentence BLEU

pub mod align;
pub mod combine;
pub mod config;
pub mod corpus;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod pipeline;
pub mod rank;
pub mod synth;

pub use error::{Error, Result};
