//! Paired iteration for contraction map sets with an external factor.
//!
//! A system couples two regions `A`, `B` of a metric space with an auxiliary
//! set `C`. Each side carries a state map (`T_A`, `T_B`), a factor update
//! (`H_A`, `H_B`) and a penalty (`f_A`, `f_B`). Iterating both sides in
//! lock-step drives the `A`-side to a limit `α` whose distance to the
//! `B`-side iterates tends to `dist(A, B)`, while the penalties fall to their
//! infima.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure function of
//! its inputs; all randomness comes from explicitly seeded samplers.
//!
//! Modules:
//!
//! - [`metric`]: points, spaces, regions, set pairs and product composition.
//! - [`cef`]: the system model and sample-based certification of the
//!   contraction inequality.
//! - [`iterate`]: the paired iteration engine, limit detection and the
//!   weak-fixed-point / uniqueness checks.
//! - [`checkers`]: tail suprema, the boundedness lemmas as trace checks and the
//!   UC / CD falsifiers.
//! - [`instances`]: built-in systems, including the dyadic example system, the
//!   Banach degenerate case, products and the 3-cyclic reduction.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod cef;
pub mod checkers;
pub mod instances;
pub mod iterate;
pub mod metric;

pub use error::{Error, Result};

pub use cef::{
    CElement, CertificationReport, ExternalFactor, ExternalFactorSystem, Quadruple, RelationP,
    Verdict,
};
pub use iterate::{ConvergenceReport, Decision, IterationTrace, PairedTrace, RunConfig, StopReason};
pub use metric::{Point, Quantity, Region, SampleRng, SetPair, Space};

/// Absolute slack for every residual-style inequality.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Length of the Cauchy confirmation window used by limit detection.
pub const CAUCHY_WINDOW: usize = 10;
