//! Egg grade and freshness classification from fused image and tabular
//! features.
//!
//! The crate covers the whole modelling pipeline: physical quality indices
//! and labels ([`domain`]), file ingestion and fusion ([`dataset`]), SMOTE
//! and PCA ([`transforms`]), a from-scratch classifier suite
//! ([`classifiers`]) and cross-validated evaluation with majority-vote
//! ensembles ([`evaluation`]).

pub mod backbones;
pub mod classifiers;
pub mod corpus;
pub mod dataset;
pub mod domain;
pub mod evaluation;
pub mod rng;
pub mod transforms;
