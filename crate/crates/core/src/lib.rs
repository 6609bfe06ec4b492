//! Numerical laboratory for nonlinear diffusion with drift,
//! `∂_t ρ = ∇·(∇ρ^m - Vρ)` on boxes with no-flux walls.
//!
//! The evolution is built by operator splitting: an implicit finite-volume
//! step for the homogeneous equation followed by a semi-Lagrangian
//! push-forward along the drift.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boussinesq;
pub mod diagnostics;
pub mod diffusion;
pub mod drift;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod splitting;
pub mod transport;

pub use error::{Error, Result};
pub use field::DensityField;
pub use grid::{Grid, Point};
