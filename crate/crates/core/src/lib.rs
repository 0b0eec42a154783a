//! Construction, evaluation and verification of rank-k solutions of
//! first-order quasilinear hyperbolic systems in Riemann-invariant form.
//!
//! A system `sum_i Delta^{mu i}_alpha(u) du^alpha/dx^i = 0` admits fields of
//! the form `u = f(r)` where the Riemann invariants `r^A = lambda^A_i(u) x^i`
//! are built from wave covectors that make the characteristic matrix rank
//! deficient. This crate provides:
//!
//! - [`linalg`]: the small dense kernel (rank, null spaces, solves,
//!   determinants) everything else is built on;
//! - [`system`]: quasilinear systems and their pointwise characteristic
//!   algebra;
//! - [`wave`]: wave-covector families, Riemann invariants, orthogonal
//!   frames, and the trace conditions certifying a (family, profile) pair;
//! - [`engine`]: profiles, implicit solutions, Newton-continuation
//!   evaluation, analytic Jacobians, and the rank-1 profile integrator;
//! - [`verify`]: independent residual checks over grids and the
//!   gradient-catastrophe scan;
//! - [`catalog`]: built-in systems and solution families with their
//!   expected verification verdicts.
//!
//! Everything is immutable after construction and safe to share across
//! threads; evaluation is pure.

pub mod catalog;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod system;
pub mod verify;
pub mod wave;

pub use error::{Error, Result};
