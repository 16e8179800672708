//! Lattice chains with Z^m multiplicities, periodic line energies and the
//! cell problem for the homogenized line-tension density.

// `!(x > 0.0)` is used on purpose to reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cellsolver;
pub mod chains;
pub mod cli;
pub mod energy;
pub mod error;
pub mod flat;
pub mod flow;
pub mod geometry;
pub mod homogenize;
pub mod sample;
pub mod verify;

pub use error::{Error, Result};
