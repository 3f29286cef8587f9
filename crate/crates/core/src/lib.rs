//! Concept frustration diagnostics for concept bottleneck models.
//!
//! The crate trains a black-box classifier, a sparse autoencoder and a
//! concept bottleneck model on shared activations, measures how known
//! concepts and unsupervised directions align under Euclidean and
//! task-aligned (averaged Fisher) geometry, and scores sign contradictions
//! among them. Data generators, a closed-form accuracy theory and paired
//! nonparametric tests support the experiment runner behind the `frustlab`
//! binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod frustration;
pub mod geometry;
pub mod ingest;
pub mod models;
pub mod numerics;
pub mod stats;
pub mod theory;

pub use data::Dataset;
pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
