//! Spectral cutoff regularization of operator dynamics on truncated Fock spaces.
//!
//! The crate is layered bottom-up:
//!
//! - [`linop`]: dense complex matrices, spectral calculus, propagators, norms.
//! - [`models`]: the catalog of `(H0, B)` pairs and relative-bound diagnostics.
//! - [`cutoff`]: spectral projections `Q_L`, cutoff Hamiltonians `H_L`, tail norms.
//! - [`seminorms`]: the test-function family and quasi-uniform seminorms.
//! - [`quadrature`]: composite Gauss-Legendre rules for operator-valued integrands.
//! - [`dynamics`]: propagator differences, Heisenberg maps, derivations and defects.
// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutoff;
pub mod dynamics;
pub mod error;
pub mod linop;
pub mod models;
pub mod quadrature;
pub mod seminorms;
pub mod tolerance;

pub use error::{Error, Result};
pub use linop::{OperatorMatrix, SpectralDecomposition, C64};
pub use models::{ModelInstance, ModelKind, ModelParams};
pub use tolerance::{Tolerances, TOL};
