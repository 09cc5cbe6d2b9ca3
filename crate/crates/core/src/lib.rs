//! Bulk-surface Cahn-Hilliard system with convection, viscosity and dynamic
//! boundary conditions, discretized on a two-dimensional strip that is
//! periodic in `x` and bounded by two boundary lines in `y`.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system lives in the companion `chdbc` crate.
//!
//! Layout:
//!
//! * [`geometry`]: mesh, bulk-surface fields, the discrete Laplace and
//!   Laplace-Beltrami operators, the generalized mean and the inverse
//!   operator `N` with its dual norm.
//! * [`potentials`]: convex-plus-perturbation potentials, minimal sections,
//!   Yosida regularization, compatibility and coercivity checks.
//! * [`velocity`]: admissible prescribed convection fields.
//! * [`solver`]: implicit time stepping with a monolithic Newton solve.
//! * [`stationary`]: the constrained stationary problem.
//! * [`diagnostics`]: per-step records, dissipation budget and the
//!   omega-limit check.
#![no_std]

extern crate alloc;

mod error;
pub mod linalg;

pub mod diagnostics;
pub mod geometry;
pub mod initial;
pub mod potentials;
pub mod solver;
pub mod stationary;
pub mod velocity;

pub use error::{Error, Result};
