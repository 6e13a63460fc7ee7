//! Example systems: the linear cat map, its blow-up at the origin and the
//! time-1 map of the figure-8 Hamiltonian.

mod blowup;
mod cat;
mod figure8;

pub use blowup::*;
pub use cat::*;
pub use figure8::*;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::wstar::EmpiricalMeasure;

/// A periodic orbit with its Lyapunov exponents `(χ_s, χ_u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbitRecord<P> {
    pub representative: P,
    pub period: usize,
    pub exponents: [f64; 2],
    /// The orbit in iteration order, starting at `representative`.
    pub points: Vec<P>,
}

impl<P: Clone> PeriodicOrbitRecord<P> {
    /// Uniform measure on the orbit.
    pub fn measure(&self) -> EmpiricalMeasure<P> {
        EmpiricalMeasure::uniform(self.points.clone()).expect("orbit is nonempty")
    }
}
