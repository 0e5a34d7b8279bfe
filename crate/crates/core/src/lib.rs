//! Numerical core for comparing random-features, neural-tangent and fully
//! trained two-layer networks with quadratic activations.
//!
//! Everything here is `no_std` + `alloc`; IO, configuration and the CLI live
//! in the `lazygap` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod activation;
pub mod datagen;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod spectra;
pub mod stieltjes;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
