use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PeriodicOrbitRecord;
use crate::cocycle::{OrbitSegment, SplittingFrame};
use crate::error::{bail, Result};
use crate::linalg::{Mat2, Vec2};
use crate::math::{ln, sqrt};
use crate::wstar::torus_reduce;

pub type IntMat2 = [[i64; 2]; 2];

/// A hyperbolic automorphism of `T²` given by `A ∈ SL(2, ℤ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "IntMat2", into = "IntMat2")]
pub struct CatMap {
    matrix: IntMat2,
}

impl TryFrom<IntMat2> for CatMap {
    type Error = crate::Error;
    fn try_from(m: IntMat2) -> Result<Self> {
        Self::new(m)
    }
}

impl From<CatMap> for IntMat2 {
    fn from(c: CatMap) -> Self {
        c.matrix
    }
}

impl Default for CatMap {
    fn default() -> Self {
        Self::standard()
    }
}

impl CatMap {
    /// Requires `det = 1` and `trace² > 4`.
    pub fn new(matrix: IntMat2) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        let det = a as i128 * d as i128 - b as i128 * c as i128;
        if det != 1 {
            bail!(Parameter, "determinant {} ≠ 1", det);
        }
        let t = (a + d) as i128;
        if t * t <= 4 {
            bail!(Parameter, "trace {} is not hyperbolic (need trace² > 4)", t);
        }
        Ok(Self { matrix })
    }

    /// `[[2, 1], [1, 1]]`.
    pub fn standard() -> Self {
        Self {
            matrix: [[2, 1], [1, 1]],
        }
    }

    pub fn matrix(&self) -> IntMat2 {
        self.matrix
    }

    pub fn as_mat2(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.matrix;
        [[a as f64, b as f64], [c as f64, d as f64]]
    }

    pub fn inverse_matrix(&self) -> IntMat2 {
        let [[a, b], [c, d]] = self.matrix;
        [[d, -b], [-c, a]]
    }

    pub fn trace(&self) -> i64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    /// Spectral radius `(|t| + √(t² − 4)) / 2`.
    pub fn lambda(&self) -> f64 {
        let t = self.trace().abs() as f64;
        (t + sqrt(t * t - 4.0)) / 2.0
    }

    pub fn log_lambda(&self) -> f64 {
        ln(self.lambda())
    }

    /// Signed eigenvalues `(stable, unstable)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let s = self.trace().signum() as f64;
        (s / self.lambda(), s * self.lambda())
    }

    /// Unit eigenvectors `(stable, unstable)`, first nonzero component positive.
    pub fn eigenvectors(&self) -> (Vec2, Vec2) {
        let (ls, lu) = self.eigenvalues();
        let m = self.as_mat2();
        (
            crate::linalg::eigvec2(&m, ls),
            crate::linalg::eigvec2(&m, lu),
        )
    }

    /// The constant eigen-splitting `E = E^s`, `F = E^u` at `len` points.
    pub fn eigen_frame(&self, len: usize) -> Result<SplittingFrame> {
        let (s, u) = self.eigenvectors();
        SplittingFrame::constant(len, &[s.to_vec()], &[u.to_vec()])
    }

    /// `Aⁿ` in exact integer arithmetic, `None` on overflow.
    pub fn power(&self, n: u32) -> Option<IntMat2> {
        let mut acc: IntMat2 = [[1, 0], [0, 1]];
        for _ in 0..n {
            acc = int_mul(&acc, &self.matrix)?;
        }
        Some(acc)
    }
}

fn int_mul(x: &IntMat2, y: &IntMat2) -> Option<IntMat2> {
    let e = |i: usize, j: usize| {
        x[i][0]
            .checked_mul(y[0][j])?
            .checked_add(x[i][1].checked_mul(y[1][j])?)
    };
    Some([[e(0, 0)?, e(0, 1)?], [e(1, 0)?, e(1, 1)?]])
}

/// A point of `(q⁻¹ℤ / ℤ)²`, stored as numerators in `0..den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RationalPoint {
    pub num: [i64; 2],
    pub den: i64,
}

impl RationalPoint {
    pub fn new(num: [i64; 2], den: i64) -> Result<Self> {
        if den < 1 {
            bail!(Parameter, "denominator {} must be ≥ 1", den);
        }
        Ok(Self {
            num: [num[0].rem_euclid(den), num[1].rem_euclid(den)],
            den,
        })
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [
            self.num[0] as f64 / self.den as f64,
            self.num[1] as f64 / self.den as f64,
        ]
    }

    /// Same point over the smallest denominator.
    pub fn reduced(&self) -> Self {
        let g = gcd(gcd(self.num[0], self.num[1]), self.den);
        Self {
            num: [self.num[0] / g, self.num[1] / g],
            den: self.den / g,
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Points on which the cat map acts: exact rationals or reals mod 1.
pub trait CatPoint: Sized {
    fn cat_image(&self, m: &CatMap) -> Self;
}

impl CatPoint for RationalPoint {
    fn cat_image(&self, m: &CatMap) -> Self {
        let [[a, b], [c, d]] = m.matrix;
        let q = self.den as i128;
        let [x, y] = [self.num[0] as i128, self.num[1] as i128];
        let nx = (a as i128 * x + b as i128 * y).rem_euclid(q);
        let ny = (c as i128 * x + d as i128 * y).rem_euclid(q);
        Self {
            num: [nx as i64, ny as i64],
            den: self.den,
        }
    }
}

impl CatPoint for [f64; 2] {
    fn cat_image(&self, m: &CatMap) -> Self {
        torus_reduce(crate::linalg::apply2(&m.as_mat2(), self))
    }
}

/// `A·x mod 1`; exact for [`RationalPoint`].
pub fn cat_apply<P: CatPoint>(m: &CatMap, x: &P) -> P {
    x.cat_image(m)
}

/// The orbit of a rational point (always periodic).
pub fn cat_orbit(m: &CatMap, start: RationalPoint) -> PeriodicOrbitRecord<RationalPoint> {
    let mut points = vec![start];
    let mut x = cat_apply(m, &start);
    while x != start {
        points.push(x);
        x = cat_apply(m, &x);
    }
    let l = m.log_lambda();
    PeriodicOrbitRecord {
        representative: start,
        period: points.len(),
        exponents: [-l, l],
        points,
    }
}

/// All orbits of the action on `{0, …, q−1}² / q`, in order of their
/// smallest point.
pub fn cat_periodic_orbits(m: &CatMap, q: i64) -> Result<Vec<PeriodicOrbitRecord<RationalPoint>>> {
    if q < 1 {
        bail!(Parameter, "denominator q = {} must be ≥ 1", q);
    }
    let n = q as usize;
    let mut seen = vec![false; n * n];
    let mut orbits = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if seen[i * n + j] {
                continue;
            }
            let orbit = cat_orbit(m, RationalPoint::new([i as i64, j as i64], q)?);
            for p in &orbit.points {
                seen[p.num[0] as usize * n + p.num[1] as usize] = true;
            }
            orbits.push(orbit);
        }
    }
    Ok(orbits)
}

/// Order of `A` in `GL(2, ℤ/q)`.
pub fn matrix_order_mod(m: &CatMap, q: i64) -> usize {
    let reduce = |x: &IntMat2| x.map(|r| r.map(|e| e.rem_euclid(q)));
    let id = reduce(&[[1, 0], [0, 1]]);
    let base = reduce(&m.matrix);
    let mut acc = base;
    let mut k = 1;
    while acc != id {
        acc = reduce(&int_mul(&acc, &base).expect("entries below q²"));
        k += 1;
    }
    k
}

impl PeriodicOrbitRecord<RationalPoint> {
    /// One period as a cocycle segment with the constant Jacobian `A`.
    pub fn orbit_segment(&self, m: &CatMap) -> Result<OrbitSegment> {
        OrbitSegment::planar(
            self.points.iter().map(RationalPoint::to_f64).collect(),
            vec![m.as_mat2(); self.period],
            Some(self.period),
        )
    }

    /// The same orbit with real coordinates.
    pub fn to_real(&self) -> PeriodicOrbitRecord<[f64; 2]> {
        PeriodicOrbitRecord {
            representative: self.representative.to_f64(),
            period: self.period,
            exponents: self.exponents,
            points: self.points.iter().map(RationalPoint::to_f64).collect(),
        }
    }
}
