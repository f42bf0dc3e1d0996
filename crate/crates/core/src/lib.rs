//! Joint placement of UPF clusters and edge applications on optional edge
//! nodes, with demand routing over a small transport network.
//!
//! The crate provides the exact integer model (with LP/MPS export and a
//! branch-and-bound solver), the ranked greedy heuristic, two comparison
//! baselines, a seeded scenario generator and an experiment harness.

#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod domain;
pub mod harness;
pub mod ilp;
pub mod pathing;
pub mod rangr;
pub mod scenario;
pub mod state;
pub mod verifier;
