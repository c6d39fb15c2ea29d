//! Finite-volume solver for the Kimura equation of random genetic drift,
//! regularized by dynamical boundary conditions.
//!
//! The bulk density `rho` lives on the truncated interval `(delta, 1 - delta)`
//! and exchanges mass with two boundary reservoirs `a` (allele lost) and `b`
//! (allele fixed):
//!
//! ```text
//! d_t rho = d_xx (x (1 - x) rho),       x in (delta, 1 - delta)
//! a'      = rho(delta)     - epsilon a
//! b'      = rho(1 - delta) - epsilon b
//! ```
//!
//! The crate provides the grid and state types, the semi-discrete generator,
//! a Crank-Nicolson integrator with a direct tridiagonal solve, conservation
//! and energy diagnostics, closed-form equilibria, and a Wright-Fisher Markov
//! chain used as an independent oracle for fixation probabilities.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod equilibrium;
mod error;
pub mod grid;
pub mod integrator;
pub mod linalg;
pub mod operator;
pub mod wright_fisher;

pub use error::{Error, Result};
pub use grid::{GridSpec, InitialCondition, StateVector, WeightVector};
pub use operator::TridiagonalOperator;
