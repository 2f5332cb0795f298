//! Orlicz-Sobolev affine energies, symmetrizations and projection bodies on regular grids.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod affine_ball;
pub mod error;
pub mod luxemburg;
pub mod orlicz;
pub mod rearrangement;
pub mod scalar_field;
pub mod star_projection;

pub use error::{Error, Result};
pub mod harness;
