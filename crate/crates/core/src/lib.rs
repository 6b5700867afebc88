//! Numerical weak KAM theory for control-affine systems on the flat torus.
//!
//! The crate computes value functions and the Lax-Oleinik semigroup by a
//! monotone semi-Lagrangian scheme, brackets the critical constant between
//! a Fourier subsolution bound and a closed-measure linear program, and
//! extracts the projected Aubry and Mather sets.

// Index loops mirror the formulas; negated float comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod aubry;
pub mod config;
pub mod controls;
pub mod critical;
pub mod distance;
pub mod error;
pub mod fourier;
pub mod frame;
pub mod grid;
pub mod lagrangian;
pub mod lax_oleinik;
pub mod measures;
pub mod minplus;
pub mod pipeline;
pub mod simplex;

pub use controls::ControlGrid;
pub use error::{Error, Result};
pub use frame::{FieldSystem, FrameMatrix};
pub use grid::{ScalarField, TorusGrid};
pub use lagrangian::{Coercivity, Drift, LagrangianSpec, Potential};
pub use minplus::PairMatrix;
