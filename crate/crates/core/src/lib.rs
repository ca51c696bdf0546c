//! Forward self-similar solutions of the two-dimensional Navier-Stokes
//! equations with (-1)-homogeneous initial data.
//!
//! The profile is split as `v = v0 + v_re`, where `v0 = exp(Delta) u0` is the
//! caloric lift of the datum and the finite-energy remainder `v_re` is the
//! fixed point of an Oseen-kernel Duhamel map.

// Index loops mirror the component formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod duhamel;
pub mod error;
pub mod grid;
pub mod heat_lift;
pub mod initial_data;
pub mod leray_solver;
pub mod quadrature;
pub mod spectral;

pub use error::{LerayError, Result};
pub use grid::{Grid, GridVectorField, ScalarField, TensorGridField};
pub use initial_data::{build_homogeneous_field, eval_u0, CircleTrace, HomogeneousField};
