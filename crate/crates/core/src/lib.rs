//! Sinkhorn matrix scaling as Bregman (mirror) gradient descent.
//!
//! The Sinkhorn iteration `φ ← (φ⁺)⁻` is run on log-kernels that may contain
//! exact zeros. Each step is recorded with the quantities that govern its
//! convergence: `H(ρ_n|ν)`, the coupling-level movement `H(π_n|π_{n+1})`,
//! the dual value, and, given a certified optimum, the `O(1/n)` rate bounds.

#![forbid(unsafe_code)]

pub mod bounds;
pub mod cli;
pub mod divergences;
pub mod error;
pub mod generate;
pub mod invariants;
pub mod measures;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod transforms;

pub use error::{Error, Result};
