//! A loss laboratory for multi-label classification.
//!
//! The crate gathers, under one deterministic roof:
//!
//! - stable scalar kernels ([`numerics`]),
//! - the rank-coupled loss family built around the zero-threshold pairwise
//!   rank loss, plus the usual binary-relevance baselines ([`losses`]),
//! - score-space divergences for consistency-style regularization
//!   ([`regularization`]),
//! - example- and label-level evaluation metrics ([`metrics`]),
//! - exact expected-risk analysis over explicit joint label distributions,
//!   including closed-form cross-checks ([`risk`]),
//! - seeded synthetic datasets and the on-disk formats ([`data`]),
//! - a linear-model training harness with Adam ([`trainer`]),
//! - finite-difference verification of every analytic gradient
//!   ([`gradcheck`]).
//!
//! Everything is `f64`. Exponentiation is routed through max-shifted
//! log-sum-exp kernels, and all randomness flows from explicitly seeded
//! ChaCha8 generators, so every pipeline reproduces byte for byte.

pub mod data;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod numerics;
pub mod regularization;
pub mod risk;
pub mod trainer;
pub mod types;

pub use types::{DomainError, LogitVector, MultiHotLabel, SoftLabel};
