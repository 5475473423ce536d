//! Allocation-only core of a privacy-preserving Byzantine-robust federated
//! learning system: RNS-CKKS homomorphic encryption, encrypted pairwise
//! model distances, masked encrypted selection for Krum / Multi-Krum /
//! Median, and the three-party training round engine.
//!
//! Everything here is pure computation over caller-supplied randomness and
//! clocks; file formats, timing and threading live in the `lancelot` crate.

#![no_std]

extern crate alloc;

pub mod agg;
pub mod arith;
pub mod error;
pub mod rns;
pub mod ckks;
pub mod distance;
pub mod exec;
pub mod fl;

pub use error::{Error, Result};
