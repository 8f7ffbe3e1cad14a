//! Deterministic federated-learning simulation with whole-process robust
//! aggregation.
//!
//! The library models a server coordinating logistic-regression clients
//! under model-replacement backdoor attacks and defends in three phases:
//! similarity-based reweighting before aggregation, a trust-weighted
//! geometric median during it, and norm clipping plus Gaussian noise after
//! it. The final model is certified by Monte-Carlo smoothing, and runs are
//! scored on accuracy, certified rate, certified accuracy, and attacker
//! false-negative rate.
//!
//! Everything is seeded: one master seed determines data synthesis,
//! partitioning, poisoning, training, noise, and smoothing, so any run is
//! reproducible bit for bit.

pub mod aggregation;
pub mod attack;
pub mod cert;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod normal;
pub mod param;
pub mod seeds;

pub use error::{Error, Result};
pub use param::ParamVector;
