//! Numerical harmonic analysis on the Heisenberg group ℍⁿ.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atoms;
pub mod error;
pub mod grid;
pub mod exponent;
pub mod group;
pub mod luxemburg;
pub mod operators;
pub mod verify;

pub use error::{Error, Result};
