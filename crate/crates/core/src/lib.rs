//! Simulation core for multimodal federated learning when clients hold
//! incomplete modalities (PET and MRI region-of-interest features).
//!
//! Everything here is pure computation over owned values: a small dense
//! numeric kit, first-neighbor clustering, the two-encoder fusion model,
//! the training objectives with hand-derived gradients, cluster-center pools,
//! the round engine with modality-aware aggregation, data partitioning and
//! evaluation metrics. The crate is `no_std` and only needs `alloc`; file
//! formats, the CLI and threading live in the companion `mmfed` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clusterpool;
pub mod data;
mod error;
pub mod federation;
pub mod finch;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod numkit;
pub mod rng;

pub use error::{Error, Result};
pub use model::Modality;
