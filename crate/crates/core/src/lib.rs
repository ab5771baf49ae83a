//! Numerics for the Dirichlet problem
//!
//! ```text
//! -div(|∇u|^{p(x)-2} ∇u) = λ f(x, u) + μ |u|^{q(x)-2} u   in Ω,   u = 0 on ∂Ω
//! ```
//!
//! with a supercritical exponent `q ≻ p*`. The supercritical term is replaced by
//! its truncation `g_K`, the truncated energy `Φ − λJ − μΨ` is discretised on a
//! box grid, three critical points are searched for (the zero field, the global
//! minimizer and a mountain-pass point), and each one is checked against the
//! level-set iteration that certifies `|u| ≤ K`. A certified solution of the
//! truncated problem solves the original one.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration and
//! the command line live in `pxlap-cli`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::len_without_is_empty)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod degiorgi;
pub mod energy;
mod error;
pub mod exponents;
pub mod expr;
pub(crate) mod fmath;
pub mod grid;
pub mod multisolve;
pub mod nonlinearity;
pub mod optim;
pub mod quadrature;
pub mod varspace;

pub use error::{Error, Result};
pub use exponents::{validate_exponents, ExponentField, ExponentSpec};
pub use grid::{Grid, ScalarField};
