//! Spectral numerics for the discrete Schrodinger operators of two and three
//! particles on the cubic lattice with zero-range attractive pair potentials.
//!
//! The crate is `no_std` and needs only an allocator. File formats, caching and
//! the command-line front end live in the `efimov` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod efimov;
pub mod error;
pub mod green;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod special;
pub mod three_body;
pub mod two_body;

pub use error::{Error, Result};
pub use model::{PairIndex, SystemConfig, TorusPoint};
