//! Numerical toolkit for non-uniformly hyperbolic dynamics.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It provides
//!
//! * [`pliss`]: exact Pliss-time combinatorics, including the localized,
//!   reduced and periodic ("ultimate") variants, with brute-force oracles;
//! * [`wstar`]: atomic measures, dense test-function families and the
//!   truncated weak* metric;
//! * [`cocycle`]: finite-time analysis of linear cocycles along orbits
//!   (subbundle norms, exponents, C-functions, domination, hyperbolic times);
//! * [`systems`]: the cat map with exact rational periodic orbits, its
//!   blow-up at the fixed point, and the figure-8 Hamiltonian time-1 map;
//! * [`manifolds`]: stable/unstable manifold continuation for planar
//!   saddles, transverse crossing detection and intersection classes.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cocycle;
pub mod error;
pub mod linalg;
pub mod manifolds;
mod math;
pub mod pliss;
pub mod sum;
pub mod systems;
pub mod wstar;

pub use error::{Error, Result};
