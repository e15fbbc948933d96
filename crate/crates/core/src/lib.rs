//! Noisy-softmax training library.
//!
//! The classifier head injects annealed noise into the true-class logit
//! during training, which postpones softmax saturation and acts as a
//! regularizer. The crate bundles the loss family (plain softmax plus five
//! noise variants with hand-derived backward passes), a minimal
//! dense/PReLU/conv feature extractor, an SGD trainer, dataset ingestion,
//! and a finite-difference gradient checker used to validate every
//! analytic gradient.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod network;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
