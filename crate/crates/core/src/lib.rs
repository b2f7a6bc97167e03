//! Verification kit for semiconvex solutions of `σ₂(D²u) = 1`.
//!
//! The crate is organised bottom-up:
//!
//! * [`sym`]: elementary symmetric polynomials and a small Jacobi eigensolver.
//! * [`sigma2`]: the operator, its branches and its linearization.
//! * [`jacobi`]: the shifted trace Jacobi inequality as an executable certificate.
//! * [`legendre`]: the Legendre-Lewy transform, the transformed equation and
//!   the Hessian quotient `σ_{n-1}/σ_{n-2}`.
//! * [`grid`] and [`fd`]: uniform potential grids, a finite-difference Newton
//!   solver and the superharmonicity and scaling experiments.
//! * [`verify`]: seeded batch suites whose output does not depend on the
//!   number of worker threads.

// Negated comparisons reject NaN on purpose; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fd;
pub mod grid;
pub mod jacobi;
pub mod legendre;
pub mod sigma2;
pub mod sym;
pub mod tolerances;
pub mod verify;

pub use error::{Error, Result};
