//! Core algorithms for simulated federated few-shot text classification.
//!
//! The crate is split along the lifecycle of an experiment: [`data`] ingests
//! and splits labeled corpora, [`model`] holds the compact residual classifier
//! with adapter slots, [`params`] provides the parameter containers and
//! federated aggregation, [`federation`] orchestrates rounds across simulated
//! clients, and [`eval`] computes classification and agreement metrics.
//!
//! Everything here is deterministic: all randomness flows from explicit 64-bit
//! seeds through [`rng`], collections iterate in lexicographic order, and
//! repeated runs produce bit-identical parameter maps and reports. The crate
//! is `no_std` (with `alloc`); file formats, HTTP, and the CLI live in the
//! companion `fedshot-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod checkpoint;
pub mod data;
pub mod eval;
pub mod federation;
pub mod model;
pub mod params;
pub mod rng;
