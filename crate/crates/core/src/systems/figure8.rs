//! Time-1 map of `H(x, y) = y² − cos(4πx)` on `S¹ × ℝ`, integrated with
//! kick-drift-kick Störmer–Verlet:
//!
//! ```text
//! y½ = y + (h/2)·F(x),   x' = x + 2h·y½,   y' = y½ + (h/2)·F(x')
//! ```
//!
//! with `F(x) = −4π sin(4πx)` plus an optional user force. Points are kept in
//! the universal cover (`x` unreduced); [`reduce_cylinder`] maps to `S¹ × ℝ`.
//!
//! Energy error: the scheme conserves a modified Hamiltonian
//! `H + h²·E₂ + O(h⁴)` with
//! `|E₂| ≤ y²|V''|/3 + V'²/6`, `V = −cos(4πx)`, so a time-1 step changes `H`
//! by at most about `h²(|E₂(p)| + |E₂(f(p))|)`. [`Figure8Step::drift_bound`]
//! reports twice that envelope evaluated at the largest `|y|` seen during
//! the step.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cocycle::OrbitSegment;
use crate::error::{bail, Result};
use crate::linalg::{det_of_product, mul2, Mat2, IDENTITY2};
use crate::math::{cos, sin, PI};
use crate::wstar::EmpiricalMeasure;

/// Saddle `p1 = (¼, 0)`.
pub const FIGURE8_P1: [f64; 2] = [0.25, 0.0];
/// Saddle `p2 = (¾, 0)`.
pub const FIGURE8_P2: [f64; 2] = [0.75, 0.0];

/// Extra position-dependent force `g(x)` added to `ẏ`, with derivative `g'`.
/// Keeps the scheme symplectic.
#[derive(Clone)]
pub struct Perturbation {
    pub force: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dforce: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl core::fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("Perturbation")
    }
}

#[derive(Clone, Debug)]
pub struct Figure8System {
    substeps: usize,
    perturbation: Option<Perturbation>,
}

impl Default for Figure8System {
    fn default() -> Self {
        Self {
            substeps: 64,
            perturbation: None,
        }
    }
}

/// Result of one time-1 step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure8Step {
    pub point: [f64; 2],
    pub jacobian: Mat2,
    /// `H(f(p)) − H(p)`.
    pub energy_change: f64,
    /// Envelope for `|energy_change|` (see module docs).
    pub drift_bound: f64,
}

pub fn hamiltonian(p: &[f64; 2]) -> f64 {
    p[1] * p[1] - cos(4.0 * PI * p[0])
}

/// `x mod 1`, `y` unchanged.
pub fn reduce_cylinder(p: [f64; 2]) -> [f64; 2] {
    let x = p[0] - libm::floor(p[0]);
    [if x >= 1.0 { 0.0 } else { x }, p[1]]
}

/// `y²|V''|/3 + V'²/6` at `(x, y)`.
fn modified_energy_envelope(x: f64, y: f64) -> f64 {
    let v1 = 4.0 * PI * sin(4.0 * PI * x);
    let v2 = 16.0 * PI * PI * cos(4.0 * PI * x);
    y * y * v2.abs() / 3.0 + v1 * v1 / 6.0
}

impl Figure8System {
    pub fn new(substeps: usize) -> Result<Self> {
        if substeps == 0 {
            bail!(Parameter, "substeps M must be ≥ 1");
        }
        Ok(Self {
            substeps,
            perturbation: None,
        })
    }

    pub fn with_perturbation(mut self, p: Perturbation) -> Self {
        self.perturbation = Some(p);
        self
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.substeps as f64
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbation.is_some()
    }

    fn force(&self, x: f64) -> f64 {
        let base = -4.0 * PI * sin(4.0 * PI * x);
        base + self.perturbation.as_ref().map_or(0.0, |p| (p.force)(x))
    }

    fn dforce(&self, x: f64) -> f64 {
        let base = -16.0 * PI * PI * cos(4.0 * PI * x);
        base + self.perturbation.as_ref().map_or(0.0, |p| (p.dforce)(x))
    }

    /// One leapfrog substep of size `h` (negative `h` inverts a step).
    pub fn leapfrog(&self, p: [f64; 2], h: f64) -> [f64; 2] {
        let [x, y] = p;
        let yh = y + 0.5 * h * self.force(x);
        let x1 = x + 2.0 * h * yh;
        [x1, yh + 0.5 * h * self.force(x1)]
    }

    fn leapfrog_with_jacobian(&self, p: [f64; 2], h: f64) -> ([f64; 2], Mat2) {
        let [x, y] = p;
        let yh = y + 0.5 * h * self.force(x);
        let x1 = x + 2.0 * h * yh;
        let k0 = [[1.0, 0.0], [0.5 * h * self.dforce(x), 1.0]];
        let drift = [[1.0, 2.0 * h], [0.0, 1.0]];
        let k1 = [[1.0, 0.0], [0.5 * h * self.dforce(x1), 1.0]];
        (
            [x1, yh + 0.5 * h * self.force(x1)],
            mul2(&k1, &mul2(&drift, &k0)),
        )
    }

    /// One substep of the time-1 map.
    pub fn substep(&self, p: [f64; 2]) -> [f64; 2] {
        self.leapfrog(p, self.step_size())
    }

    pub fn substep_inverse(&self, p: [f64; 2]) -> [f64; 2] {
        self.leapfrog(p, -self.step_size())
    }

    /// Jacobian of one substep.
    pub fn substep_jacobian(&self, p: [f64; 2]) -> Mat2 {
        self.leapfrog_with_jacobian(p, self.step_size()).1
    }

    /// The time-1 map without derivative.
    pub fn time1_point(&self, p: [f64; 2]) -> [f64; 2] {
        (0..self.substeps).fold(p, |q, _| self.substep(q))
    }

    pub fn time1_inverse(&self, p: [f64; 2]) -> [f64; 2] {
        (0..self.substeps).fold(p, |q, _| self.substep_inverse(q))
    }

    /// The time-1 map with its Jacobian from the discrete variational
    /// equations and the energy bookkeeping.
    pub fn time1(&self, p: [f64; 2]) -> Figure8Step {
        let h = self.step_size();
        let mut q = p;
        let mut jac = IDENTITY2;
        let mut ymax = p[1].abs();
        for _ in 0..self.substeps {
            let (next, j) = self.leapfrog_with_jacobian(q, h);
            jac = mul2(&j, &jac);
            q = next;
            ymax = ymax.max(q[1].abs());
        }
        Figure8Step {
            point: q,
            jacobian: jac,
            energy_change: hamiltonian(&q) - hamiltonian(&p),
            drift_bound: self.drift_bound(ymax),
        }
    }

    /// `det Df(p)` from the shear factors of every substep, multiplied in
    /// double-double arithmetic; equals 1 up to rounding of that product.
    pub fn time1_det(&self, p: [f64; 2]) -> f64 {
        let h = self.step_size();
        let mut factors = Vec::with_capacity(3 * self.substeps);
        let mut q = p;
        for _ in 0..self.substeps {
            let [x, y] = q;
            let yh = y + 0.5 * h * self.force(x);
            let x1 = x + 2.0 * h * yh;
            factors.push([[1.0, 0.0], [0.5 * h * self.dforce(x), 1.0]]);
            factors.push([[1.0, 2.0 * h], [0.0, 1.0]]);
            factors.push([[1.0, 0.0], [0.5 * h * self.dforce(x1), 1.0]]);
            q = [x1, yh + 0.5 * h * self.force(x1)];
        }
        det_of_product(factors)
    }

    /// `2h²·max E₂` over `|y| ≤ y_max`.
    pub fn drift_bound(&self, y_max: f64) -> f64 {
        let h = self.step_size();
        let e2 = y_max * y_max * 16.0 * PI * PI / 3.0 + 16.0 * PI * PI / 6.0;
        2.0 * h * h * e2
    }
}

/// `(f(p), Df(p))` for the time-1 map.
pub fn figure8_time1(s: &Figure8System, p: [f64; 2]) -> ([f64; 2], Mat2) {
    let step = s.time1(p);
    (step.point, step.jacobian)
}

/// The point `(x, 0)` with `x ∈ (¼, ½)` on `{H = 1 − ε}`, by bisection.
pub fn level_curve_start(eps: f64) -> Result<[f64; 2]> {
    if !(eps > 0.0 && eps < 1.0) {
        bail!(Parameter, "ε = {} outside (0, 1)", eps);
    }
    let target = 1.0 - eps;
    // H(x, 0) decreases from 1 to −1 on [¼, ½].
    let (mut lo, mut hi) = (0.25, 0.5);
    while hi - lo > 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hamiltonian(&[mid, 0.0]) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok([0.5 * (lo + hi), 0.0])
}

/// A level-curve trajectory `x_0, …, x_T` with Jacobians `J_i = Df(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurveOrbit {
    pub eps: f64,
    pub points: Vec<[f64; 2]>,
    pub jacobians: Vec<Mat2>,
    /// `max_i |H(x_i) − (1 − ε)|`.
    pub max_energy_deviation: f64,
    /// Envelope for `max_energy_deviation` (see module docs).
    pub energy_tolerance: f64,
    /// Least-squares slope of `H(x_i)` against `i` (per unit time).
    pub energy_drift_rate: f64,
}

impl LevelCurveOrbit {
    /// The trajectory as a (non-periodic) cocycle segment.
    pub fn orbit_segment(&self) -> Result<OrbitSegment> {
        OrbitSegment::planar(self.points.clone(), self.jacobians.clone(), None)
    }

    /// Uniform measure on `x_0, …, x_{T−1}` reduced to `S¹ × ℝ`.
    pub fn measure(&self) -> EmpiricalMeasure<[f64; 2]> {
        let t = self.jacobians.len();
        EmpiricalMeasure::uniform(self.points[..t].iter().map(|p| reduce_cylinder(*p)).collect())
            .expect("T ≥ 1")
    }
}

/// Least-squares slope of `values[i]` against `i`.
pub fn regression_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let tbar = (n - 1.0) / 2.0;
    let vbar = crate::sum::sum(values.iter().copied()) / n;
    let num = crate::sum::sum(
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (i as f64 - tbar) * (v - vbar)),
    );
    let den = crate::sum::sum((0..values.len()).map(|i| (i as f64 - tbar) * (i as f64 - tbar)));
    num / den
}

/// Iterates the time-1 map `T` times from [`level_curve_start`].
pub fn level_curve_orbit(s: &Figure8System, eps: f64, t: usize) -> Result<LevelCurveOrbit> {
    if t == 0 {
        bail!(Parameter, "T must be ≥ 1");
    }
    let start = level_curve_start(eps)?;
    let mut points = Vec::with_capacity(t + 1);
    let mut jacobians = Vec::with_capacity(t);
    let mut energies = Vec::with_capacity(t + 1);
    let mut p = start;
    let mut ymax = 0.0f64;
    points.push(p);
    energies.push(hamiltonian(&p));
    for _ in 0..t {
        let step = s.time1(p);
        jacobians.push(step.jacobian);
        p = reduce_cylinder(step.point);
        ymax = ymax.max(p[1].abs());
        points.push(p);
        energies.push(hamiltonian(&p));
    }
    let target = 1.0 - eps;
    let max_energy_deviation = energies
        .iter()
        .map(|e| (e - target).abs())
        .fold(0.0, f64::max);
    let h = s.step_size();
    let energy_tolerance = h * h * modified_energy_envelope(start[0], start[1]) + 0.5 * s.drift_bound(ymax);
    Ok(LevelCurveOrbit {
        eps,
        energy_drift_rate: regression_slope(&energies),
        points,
        jacobians,
        max_energy_deviation,
        energy_tolerance,
    })
}

/// Uniform measure on `T` points of the level curve `{H = 1 − ε}`.
pub fn level_curve_measure(s: &Figure8System, eps: f64, t: usize) -> Result<EmpiricalMeasure<[f64; 2]>> {
    Ok(level_curve_orbit(s, eps, t)?.measure())
}
