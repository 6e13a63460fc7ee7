//! Stable and unstable manifolds of planar saddles, transverse
//! intersections between them, and intersection classes.
//!
//! Curves are grown in a working coordinate space (the universal cover for
//! the torus and the cylinder, polar coordinates for the blow-up) and cut
//! into patch polylines for crossing detection.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::linalg::{apply2, det2, eigen2_with_det, inverse2, mul2, Eigen2, Mat2, Vec2, IDENTITY2};
use crate::math::{atan2, cos, hypot, pow, sin};
use crate::systems::{centered, BlowupFixedPoint, CatMap, Figure8System};

/// Coordinates of a point in one patch of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchPoint {
    pub patch: u8,
    pub coords: [f64; 2],
}

/// A planar map acting on working coordinates.
pub trait SurfaceMap {
    fn forward(&self, p: [f64; 2]) -> [f64; 2];
    fn backward(&self, p: [f64; 2]) -> [f64; 2];
    fn jacobian(&self, p: [f64; 2]) -> Mat2;
    /// Deck translation nearest to `v`; zero when the working space is not
    /// a cover.
    fn deck(&self, _v: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    /// Coordinates in every patch containing `p`.
    fn patches(&self, p: [f64; 2], out: &mut Vec<PatchPoint>);
    /// Periods of the patch coordinates (`None` for non-periodic axes).
    fn patch_period(&self, patch: u8) -> [Option<f64>; 2];
    /// Whether two consecutive curve points of one patch may be joined by
    /// a chord in that patch.
    fn chord_valid(&self, _patch: u8, _a: [f64; 2], _b: [f64; 2]) -> bool {
        true
    }
}

/// A linear map of the plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneLinearMap {
    a: Mat2,
    a_inv: Mat2,
}

impl PlaneLinearMap {
    pub fn new(a: Mat2) -> Result<Self> {
        Ok(Self { a, a_inv: inverse2(&a)? })
    }
}

impl SurfaceMap for PlaneLinearMap {
    fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        apply2(&self.a, &p)
    }
    fn backward(&self, p: [f64; 2]) -> [f64; 2] {
        apply2(&self.a_inv, &p)
    }
    fn jacobian(&self, _p: [f64; 2]) -> Mat2 {
        self.a
    }
    fn patches(&self, p: [f64; 2], out: &mut Vec<PatchPoint>) {
        out.push(PatchPoint { patch: 0, coords: p });
    }
    fn patch_period(&self, _patch: u8) -> [Option<f64>; 2] {
        [None, None]
    }
}

/// The cat map lifted to `ℝ²` (the linear map `A`), reduced mod 1 for
/// crossing detection.
#[derive(Debug, Clone, Copy)]
pub struct TorusLinearMap {
    a: Mat2,
    a_inv: Mat2,
}

impl TorusLinearMap {
    pub fn new(m: &CatMap) -> Self {
        let [[a, b], [c, d]] = m.inverse_matrix();
        Self {
            a: m.as_mat2(),
            a_inv: [[a as f64, b as f64], [c as f64, d as f64]],
        }
    }
}

impl SurfaceMap for TorusLinearMap {
    fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        apply2(&self.a, &p)
    }
    fn backward(&self, p: [f64; 2]) -> [f64; 2] {
        apply2(&self.a_inv, &p)
    }
    fn jacobian(&self, _p: [f64; 2]) -> Mat2 {
        self.a
    }
    fn deck(&self, v: [f64; 2]) -> [f64; 2] {
        [libm::round(v[0]), libm::round(v[1])]
    }
    fn patches(&self, p: [f64; 2], out: &mut Vec<PatchPoint>) {
        out.push(PatchPoint { patch: 0, coords: p });
    }
    fn patch_period(&self, _patch: u8) -> [Option<f64>; 2] {
        [Some(1.0), Some(1.0)]
    }
}

/// One leapfrog substep `g` of the figure-8 system (`f = g^M`) on the
/// cover `ℝ × ℝ` of the cylinder. `f` and `g` share their saddles and
/// invariant manifolds; `g` stretches by `λ^{1/M}` per step, which keeps
/// the continuation well resolved.
#[derive(Debug, Clone)]
pub struct Figure8SubstepMap {
    system: Figure8System,
}

impl Figure8SubstepMap {
    pub fn new(system: Figure8System) -> Self {
        Self { system }
    }

    pub fn system(&self) -> &Figure8System {
        &self.system
    }
}

impl SurfaceMap for Figure8SubstepMap {
    fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        self.system.substep(p)
    }
    fn backward(&self, p: [f64; 2]) -> [f64; 2] {
        self.system.substep_inverse(p)
    }
    fn jacobian(&self, p: [f64; 2]) -> Mat2 {
        self.system.substep_jacobian(p)
    }
    fn deck(&self, v: [f64; 2]) -> [f64; 2] {
        [libm::round(v[0]), 0.0]
    }
    fn patches(&self, p: [f64; 2], out: &mut Vec<PatchPoint>) {
        out.push(PatchPoint { patch: 0, coords: p });
    }
    fn patch_period(&self, _patch: u8) -> [Option<f64>; 2] {
        [Some(1.0), None]
    }
}

/// Patch ids of [`BlowupPolarMap`].
pub const BLOWUP_TORUS_PATCH: u8 = 0;
pub const BLOWUP_CHART1_PATCH: u8 = 1;
pub const BLOWUP_CHART2_PATCH: u8 = 2;

/// The blow-up of the cat map in polar coordinates `(r, θ)` about the
/// origin, `x = r·(cos θ, sin θ)`. The exceptional fiber is the line
/// `r = 0`; the lift is `(r, θ) ↦ (r·|A e_θ|, arg A e_θ)` with the
/// argument continued from `θ`.
///
/// Patches: the torus (points at distance `≥ r_in` from the lattice) and the
/// two affine charts of the blow-up (points closer than `r_out`, chart
/// coordinate bounded by `chart_bound`). In a chart, chords across `s = 0`
/// are never drawn: the only curves meeting `C` start on it.
#[derive(Debug, Clone, Copy)]
pub struct BlowupPolarMap {
    a: Mat2,
    a_inv: Mat2,
    pub r_in: f64,
    pub r_out: f64,
    pub chart_bound: f64,
}

impl BlowupPolarMap {
    /// Requires positive eigenvalues (`trace > 2`).
    pub fn new(m: &CatMap) -> Result<Self> {
        if m.trace() < 0 {
            bail!(Parameter, "polar lift needs positive eigenvalues; use the square of the matrix");
        }
        let [[a, b], [c, d]] = m.inverse_matrix();
        Ok(Self {
            a: m.as_mat2(),
            a_inv: [[a as f64, b as f64], [c as f64, d as f64]],
            r_in: 0.05,
            r_out: 0.1,
            chart_bound: 2.0,
        })
    }

    /// Working coordinates `(0, θ)` of a fixed point on `C`.
    pub fn fiber_point(fixed: &BlowupFixedPoint) -> [f64; 2] {
        [0.0, fixed.point.angle()]
    }

    fn image(a: &Mat2, [r, th]: [f64; 2]) -> [f64; 2] {
        let e = [cos(th), sin(th)];
        let ae = apply2(a, &e);
        let rho = hypot(ae[0], ae[1]);
        let rot = atan2(e[0] * ae[1] - e[1] * ae[0], e[0] * ae[0] + e[1] * ae[1]);
        [r * rho, th + rot]
    }

    /// Plane point of working coordinates.
    pub fn to_plane([r, th]: [f64; 2]) -> [f64; 2] {
        [r * cos(th), r * sin(th)]
    }
}

impl SurfaceMap for BlowupPolarMap {
    fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        Self::image(&self.a, p)
    }
    fn backward(&self, p: [f64; 2]) -> [f64; 2] {
        Self::image(&self.a_inv, p)
    }
    fn jacobian(&self, [r, th]: [f64; 2]) -> Mat2 {
        let e = [cos(th), sin(th)];
        let de = [-sin(th), cos(th)];
        let ae = apply2(&self.a, &e);
        let ade = apply2(&self.a, &de);
        let rho2 = ae[0] * ae[0] + ae[1] * ae[1];
        let rho = libm::sqrt(rho2);
        let drho = (ae[0] * ade[0] + ae[1] * ade[1]) / rho;
        [[rho, r * drho], [0.0, det2(&self.a) / rho2]]
    }
    fn patches(&self, p: [f64; 2], out: &mut Vec<PatchPoint>) {
        let x = Self::to_plane(p);
        let c = centered(x);
        let dist = hypot(c[0], c[1]);
        if p[0] != 0.0 && dist >= self.r_in {
            out.push(PatchPoint {
                patch: BLOWUP_TORUS_PATCH,
                coords: x,
            });
        }
        if dist < self.r_out {
            // On C the direction is e_θ; off C it is c itself.
            let (s1, s2, dx, dy) = if p[0] == 0.0 {
                (0.0, 0.0, cos(p[1]), sin(p[1]))
            } else {
                (c[0], c[1], c[0], c[1])
            };
            if dx != 0.0 && (dy / dx).abs() <= self.chart_bound {
                out.push(PatchPoint {
                    patch: BLOWUP_CHART1_PATCH,
                    coords: [s1, dy / dx],
                });
            }
            if dy != 0.0 && (dx / dy).abs() <= self.chart_bound {
                out.push(PatchPoint {
                    patch: BLOWUP_CHART2_PATCH,
                    coords: [s2, dx / dy],
                });
            }
        }
    }
    fn patch_period(&self, patch: u8) -> [Option<f64>; 2] {
        if patch == BLOWUP_TORUS_PATCH {
            [Some(1.0), Some(1.0)]
        } else {
            [None, None]
        }
    }
    fn chord_valid(&self, patch: u8, a: [f64; 2], b: [f64; 2]) -> bool {
        patch == BLOWUP_TORUS_PATCH || a[0] * b[0] >= 0.0
    }
}

/// A hyperbolic periodic point in working coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleRecord {
    pub point: [f64; 2],
    pub period: usize,
    /// Deck translation with `f^π(p) = p + shift`.
    pub shift: [f64; 2],
    /// `[λ_s, λ_u]` of the return map, `|λ_s| < 1 < |λ_u|`.
    pub eigenvalues: [f64; 2],
    /// Unit eigenvectors `[v_s, v_u]`.
    pub eigenvectors: [Vec2; 2],
    /// `max |J v − λ v| / max(1, |λ|)` over both pairs.
    pub residual: f64,
}

/// Eigen-residual bound for [`SaddleRecord`].
pub const SADDLE_RESIDUAL: f64 = 1e-9;
const CLOSING_TOLERANCE: f64 = 1e-8;

impl SaddleRecord {
    pub fn new(map: &dyn SurfaceMap, point: [f64; 2], period: usize) -> Result<Self> {
        if period == 0 {
            bail!(Parameter, "period must be ≥ 1");
        }
        let mut x = point;
        let mut jac = IDENTITY2;
        let mut det = 1.0;
        for _ in 0..period {
            let j = map.jacobian(x);
            det *= det2(&j);
            jac = mul2(&j, &jac);
            x = map.forward(x);
        }
        let diff = [x[0] - point[0], x[1] - point[1]];
        let shift = map.deck(diff);
        let gap = hypot(diff[0] - shift[0], diff[1] - shift[1]);
        if !(gap <= CLOSING_TOLERANCE) {
            bail!(Precondition, "point does not return after {} steps (gap {:e})", period, gap);
        }
        let Eigen2::Real { values, vectors } = eigen2_with_det(&jac, det) else {
            bail!(Precondition, "return map has complex eigenvalues");
        };
        if !(values[0].abs() < 1.0 && values[1].abs() > 1.0) {
            bail!(Precondition, "eigenvalues {:?} are not of saddle type", values);
        }
        let mut residual = 0.0f64;
        for k in 0..2 {
            let jv = apply2(&jac, &vectors[k]);
            let r = hypot(jv[0] - values[k] * vectors[k][0], jv[1] - values[k] * vectors[k][1]);
            residual = residual.max(r / values[k].abs().max(1.0));
        }
        if !(residual <= SADDLE_RESIDUAL) {
            bail!(Precondition, "eigen-residual {:e} above {:e}", residual, SADDLE_RESIDUAL);
        }
        Ok(Self {
            point,
            period,
            shift,
            eigenvalues: values,
            eigenvectors: vectors,
            residual,
        })
    }

    /// Number of contracting directions.
    pub fn s_index(&self) -> usize {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Continuation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    /// Arclength budget per branch (working coordinates).
    pub arclength: f64,
    /// Chord tolerance: the sagitta `h·α/8` of each new segment stays below.
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Largest turn angle between consecutive segments.
    pub max_angle: f64,
    pub max_points: usize,
    /// Seed length is `seed_factor · (λ_u − 1)`.
    pub seed_factor: f64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self {
            arclength: 10.0,
            tol: 1e-6,
            h_min: 1e-7,
            h_max: 0.01,
            max_angle: 0.2,
            max_points: 2_000_000,
            seed_factor: 1e-6,
        }
    }
}

impl GrowthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.arclength > 0.0 && self.tol > 0.0 && self.h_min > 0.0 && self.h_min < self.h_max) {
            bail!(Parameter, "need arclength, tol > 0 and 0 < h_min < h_max");
        }
        if !(self.max_angle > 0.0 && self.seed_factor > 0.0) || self.max_points < 16 {
            bail!(Parameter, "need max_angle, seed_factor > 0 and max_points ≥ 16");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveFlags {
    /// Some step needed finer resolution than the source parameter allows.
    pub partial: bool,
    /// Growth stopped before the budget: the curve accumulates on a point.
    pub stalled: bool,
    /// Stopped at `max_points`.
    pub point_cap: bool,
}

/// A maximal run of curve points inside one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchPolyline {
    pub patch: u8,
    pub period: [Option<f64>; 2],
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCurve {
    pub branch: Branch,
    pub side: Side,
    /// Working coordinates; the first point is the saddle.
    pub polyline: Vec<[f64; 2]>,
    pub arclength: f64,
    pub pieces: Vec<PatchPolyline>,
    pub flags: CurveFlags,
    pub h_min: f64,
    pub h_max: f64,
}

/// `R = f^π − shift` or its inverse, squared when the eigenvalue is negative.
struct ReturnStep<'a> {
    map: &'a dyn SurfaceMap,
    period: usize,
    shift: [f64; 2],
    forward: bool,
}

impl ReturnStep<'_> {
    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        if self.forward {
            let q = (0..self.period).fold(p, |q, _| self.map.forward(q));
            [q[0] - self.shift[0], q[1] - self.shift[1]]
        } else {
            let q = [p[0] + self.shift[0], p[1] + self.shift[1]];
            (0..self.period).fold(q, |q, _| self.map.backward(q))
        }
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    hypot(a[0] - b[0], a[1] - b[1])
}

fn turn_angle(u: [f64; 2], v: [f64; 2]) -> f64 {
    atan2((u[0] * v[1] - u[1] * v[0]).abs(), u[0] * v[0] + u[1] * v[1])
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Point at global parameter `τ` (segment index + fraction).
fn at_parameter(curve: &[[f64; 2]], tau: f64) -> [f64; 2] {
    let k = (libm::floor(tau) as usize).min(curve.len() - 2);
    lerp(curve[k], curve[k + 1], tau - k as f64)
}

const SEED_POINTS: usize = 8;
const MIN_SOURCE_STEP: f64 = 1e-14;
const STALL_WINDOW: usize = 256;

/// Grows one branch of `W^u(p)` or `W^s(p)`.
///
/// The branch is seeded by first-order points `p ± t·v`, `t` geometric in
/// `[δ/λ, δ]` with `δ = seed_factor·(λ − 1)` (offset error `O(δ²)`), then
/// extended by images of earlier points: a source parameter walks along the
/// curve and each new point is the image of the source, the source step
/// being halved while the new segment is longer than `h_max`, turns by more
/// than `max_angle` or has sagitta above `tol`, and doubled while it is
/// shorter than `h_min` (or well inside all three limits). Growth stops early (flagged `stalled`) once a
/// window of new points adds less than `h_min` of arclength.
pub fn grow_manifold(
    map: &dyn SurfaceMap,
    saddle: &SaddleRecord,
    branch: Branch,
    side: Side,
    params: &GrowthParams,
) -> Result<ManifoldCurve> {
    params.validate()?;
    let (mut lambda, v) = match branch {
        Branch::Unstable => (saddle.eigenvalues[1], saddle.eigenvectors[1]),
        Branch::Stable => (1.0 / saddle.eigenvalues[0], saddle.eigenvectors[0]),
    };
    let mut period = saddle.period;
    let mut shift = saddle.shift;
    if lambda < 0.0 {
        // Orientation-reversing: the square keeps each side.
        lambda *= lambda;
        period *= 2;
        let mut x = saddle.point;
        for _ in 0..period {
            x = map.forward(x);
        }
        shift = map.deck(sub(x, saddle.point));
    }
    let step = ReturnStep {
        map,
        period,
        shift,
        forward: branch == Branch::Unstable,
    };
    let p = saddle.point;
    let delta = params.seed_factor * (lambda - 1.0);
    let sign = side.sign();
    let mut curve = Vec::with_capacity(1024);
    curve.push(p);
    for k in 0..SEED_POINTS {
        let t = delta * pow(lambda, -((SEED_POINTS - 1 - k) as f64) / (SEED_POINTS - 1) as f64);
        curve.push([p[0] + sign * t * v[0], p[1] + sign * t * v[1]]);
    }
    let mut arclength: f64 = curve.windows(2).map(|w| dist(w[0], w[1])).sum();
    let mut flags = CurveFlags::default();
    let mut tau: f64 = 1.0;
    let mut dstep: f64 = 1.0;
    let mut checkpoint = (curve.len(), arclength);
    while arclength < params.arclength {
        if curve.len() >= params.max_points {
            flags.point_cap = true;
            break;
        }
        let head = curve.len() - 1;
        let last = curve[head];
        let dir = sub(last, curve[head - 1]);
        let mut accepted: Option<(f64, [f64; 2], f64)> = None;
        let mut trial = dstep;
        loop {
            let cand = (tau + trial).min(head as f64);
            if cand - tau < MIN_SOURCE_STEP {
                break;
            }
            let q = step.apply(at_parameter(&curve, cand));
            let d = dist(last, q);
            let angle = turn_angle(dir, sub(q, last));
            let ok = d <= params.h_max && angle <= params.max_angle && d * angle <= 8.0 * params.tol;
            if ok {
                accepted = Some((cand, q, d));
                // Coarsen while the segment is short and nearly straight.
                let slack = d < 0.5 * params.h_max
                    && angle < 0.5 * params.max_angle
                    && d * angle < 4.0 * params.tol;
                if (d < params.h_min || slack) && cand < head as f64 {
                    trial *= 2.0;
                    continue;
                }
                break;
            }
            if accepted.is_some() {
                break;
            }
            trial *= 0.5;
            if trial < MIN_SOURCE_STEP {
                flags.partial = true;
                accepted = Some((cand, q, d));
                break;
            }
        }
        let Some((cand, q, d)) = accepted else {
            flags.stalled = true;
            break;
        };
        dstep = cand - tau;
        tau = cand;
        if d > 0.0 {
            curve.push(q);
            arclength += d;
        }
        if curve.len() >= checkpoint.0 + STALL_WINDOW {
            // Increments decaying geometrically: the branch accumulates on
            // a point (another saddle or a sink of the return map).
            if arclength - checkpoint.1 < params.h_min {
                flags.stalled = true;
                break;
            }
            checkpoint = (curve.len(), arclength);
        }
    }
    let pieces = cut_into_patches(map, &curve);
    Ok(ManifoldCurve {
        branch,
        side,
        polyline: curve,
        arclength,
        pieces,
        flags,
        h_min: params.h_min,
        h_max: params.h_max,
    })
}

fn cut_into_patches(map: &dyn SurfaceMap, curve: &[[f64; 2]]) -> Vec<PatchPolyline> {
    let mut done: Vec<PatchPolyline> = Vec::new();
    let mut open: BTreeMap<u8, PatchPolyline> = BTreeMap::new();
    let mut buf = Vec::with_capacity(3);
    for &x in curve {
        buf.clear();
        map.patches(x, &mut buf);
        let present: Vec<u8> = buf.iter().map(|p| p.patch).collect();
        let closing: Vec<u8> = open.keys().copied().filter(|k| !present.contains(k)).collect();
        for k in closing {
            let run = open.remove(&k).expect("open run");
            if run.points.len() >= 2 {
                done.push(run);
            }
        }
        for pp in &buf {
            let period = map.patch_period(pp.patch);
            match open.get_mut(&pp.patch) {
                Some(run) => {
                    let prev = *run.points.last().expect("nonempty run");
                    let mut c = pp.coords;
                    for i in 0..2 {
                        if let Some(l) = period[i] {
                            c[i] -= l * libm::round((c[i] - prev[i]) / l);
                        }
                    }
                    if map.chord_valid(pp.patch, prev, c) {
                        run.points.push(c);
                    } else {
                        let finished = core::mem::replace(
                            run,
                            PatchPolyline {
                                patch: pp.patch,
                                period,
                                points: vec![pp.coords],
                            },
                        );
                        if finished.points.len() >= 2 {
                            done.push(finished);
                        }
                    }
                }
                None => {
                    open.insert(
                        pp.patch,
                        PatchPolyline {
                            patch: pp.patch,
                            period,
                            points: vec![pp.coords],
                        },
                    );
                }
            }
        }
    }
    done.extend(open.into_values().filter(|r| r.points.len() >= 2));
    done
}

/// A transverse crossing of two curves, in patch coordinates reduced to the
/// fundamental domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub patch: u8,
    pub point: [f64; 2],
    /// Acute angle between the chords, in `[0, π/2]`.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    a: [f64; 2],
    b: [f64; 2],
}

fn reduce(p: [f64; 2], period: [Option<f64>; 2]) -> [f64; 2] {
    let mut q = p;
    for i in 0..2 {
        if let Some(l) = period[i] {
            q[i] -= l * libm::floor(q[i] / l);
            if q[i] >= l {
                q[i] -= l;
            }
        }
    }
    q
}

fn base_shift(p: [f64; 2], period: [Option<f64>; 2]) -> [f64; 2] {
    let r = reduce(p, period);
    [p[0] - r[0], p[1] - r[1]]
}

fn periodic_dist(a: [f64; 2], b: [f64; 2], period: [Option<f64>; 2]) -> f64 {
    let mut d = sub(a, b);
    for i in 0..2 {
        if let Some(l) = period[i] {
            d[i] -= l * libm::round(d[i] / l);
        }
    }
    hypot(d[0], d[1])
}

fn segment_crossing(s: &Seg, t: &Seg) -> Option<([f64; 2], f64)> {
    let d1 = sub(s.b, s.a);
    let d2 = sub(t.b, t.a);
    let den = d1[0] * d2[1] - d1[1] * d2[0];
    if den == 0.0 {
        return None;
    }
    let w = sub(t.a, s.a);
    let u1 = (w[0] * d2[1] - w[1] * d2[0]) / den;
    let u2 = (w[0] * d1[1] - w[1] * d1[0]) / den;
    if !((0.0..=1.0).contains(&u1) && (0.0..=1.0).contains(&u2)) {
        return None;
    }
    let angle = atan2(den.abs(), (d1[0] * d2[0] + d1[1] * d2[1]).abs());
    Some((lerp(s.a, s.b, u1), angle))
}

/// Cells spanned by a bounding box, or `None` if too many.
fn cells(a: [f64; 2], b: [f64; 2], cell: f64) -> Option<(i64, i64, i64, i64)> {
    let lo = |x: f64, y: f64| libm::floor(x.min(y) / cell) as i64;
    let hi = |x: f64, y: f64| libm::floor(x.max(y) / cell) as i64;
    let r = (lo(a[0], b[0]), hi(a[0], b[0]), lo(a[1], b[1]), hi(a[1], b[1]));
    ((r.1 - r.0 + 1) * (r.3 - r.2 + 1) <= 4096).then_some(r)
}

const MAX_CELLS: i64 = 1 << 20;

/// All crossings of the two curves with angle `≥ angle_min`, found per
/// patch with a uniform spatial hash (cell size the larger `h_max`).
/// Parallel chords never cross; crossings closer than `h_min` within a patch
/// are merged.
pub fn transverse_intersections(c1: &ManifoldCurve, c2: &ManifoldCurve, angle_min: f64) -> Vec<Crossing> {
    let cell = c1.h_max.max(c2.h_max);
    let h_min = c1.h_min.min(c2.h_min);
    let mut out: Vec<Crossing> = Vec::new();
    let mut patches: Vec<u8> = c1.pieces.iter().map(|p| p.patch).collect();
    patches.sort_unstable();
    patches.dedup();
    for patch in patches {
        let Some(period) = c1.pieces.iter().find(|p| p.patch == patch).map(|p| p.period) else {
            continue;
        };
        let shifts: Vec<[f64; 2]> = {
            let r = |i: usize| -> Vec<f64> {
                match period[i] {
                    Some(l) => vec![-l, 0.0, l],
                    None => vec![0.0],
                }
            };
            let (xs, ys) = (r(0), r(1));
            xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect()
        };
        let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        let mut big: Vec<usize> = Vec::new();
        let mut segs2: Vec<Seg> = Vec::new();
        for piece in c2.pieces.iter().filter(|p| p.patch == patch) {
            for w in piece.points.windows(2) {
                let o = base_shift(w[0], period);
                for sh in &shifts {
                    let seg = Seg {
                        a: [w[0][0] - o[0] + sh[0], w[0][1] - o[1] + sh[1]],
                        b: [w[1][0] - o[0] + sh[0], w[1][1] - o[1] + sh[1]],
                    };
                    let id = segs2.len();
                    segs2.push(seg);
                    match cells(seg.a, seg.b, cell) {
                        Some((x0, x1, y0, y1)) if x0.abs() < MAX_CELLS && y0.abs() < MAX_CELLS => {
                            for i in x0..=x1 {
                                for j in y0..=y1 {
                                    grid.entry((i, j)).or_default().push(id);
                                }
                            }
                        }
                        _ => big.push(id),
                    }
                }
            }
        }
        let mut found: Vec<Crossing> = Vec::new();
        let mut candidates: Vec<usize> = Vec::new();
        for piece in c1.pieces.iter().filter(|p| p.patch == patch) {
            for w in piece.points.windows(2) {
                let o = base_shift(w[0], period);
                let s = Seg {
                    a: sub(w[0], o),
                    b: sub(w[1], o),
                };
                candidates.clear();
                candidates.extend_from_slice(&big);
                match cells(s.a, s.b, cell) {
                    Some((x0, x1, y0, y1)) => {
                        for i in x0..=x1 {
                            for j in y0..=y1 {
                                if let Some(ids) = grid.get(&(i, j)) {
                                    candidates.extend_from_slice(ids);
                                }
                            }
                        }
                    }
                    None => candidates.extend(0..segs2.len()),
                }
                candidates.sort_unstable();
                candidates.dedup();
                for &id in &candidates {
                    if let Some((pt, angle)) = segment_crossing(&s, &segs2[id]) {
                        if angle < angle_min {
                            continue;
                        }
                        let pt = reduce(pt, period);
                        if found.iter().all(|c| periodic_dist(c.point, pt, period) > h_min) {
                            found.push(Crossing { patch, point: pt, angle });
                        }
                    }
                }
            }
        }
        out.extend(found);
    }
    out
}

/// Both branches of both manifolds of a saddle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleManifolds {
    pub unstable: [ManifoldCurve; 2],
    pub stable: [ManifoldCurve; 2],
}

pub fn grow_all(map: &dyn SurfaceMap, saddle: &SaddleRecord, params: &GrowthParams) -> Result<SaddleManifolds> {
    let g = |b, s| grow_manifold(map, saddle, b, s, params);
    Ok(SaddleManifolds {
        unstable: [g(Branch::Unstable, Side::Plus)?, g(Branch::Unstable, Side::Minus)?],
        stable: [g(Branch::Stable, Side::Plus)?, g(Branch::Stable, Side::Minus)?],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationReason {
    /// Transverse crossings found in both directions.
    Related,
    /// Stable indices differ.
    IndexMismatch,
    /// No crossing above the angle threshold within the budget for
    /// `W^u(p) ∩ W^s(q)`, `W^u(q) ∩ W^s(p)` or both. Never a mathematical
    /// negative.
    NotFoundWithinBudget { forward: bool, backward: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub related: bool,
    pub reason: RelationReason,
    /// Crossings of `W^u(p)` with `W^s(q)`.
    pub forward: Vec<Crossing>,
    /// Crossings of `W^u(q)` with `W^s(p)`.
    pub backward: Vec<Crossing>,
}

/// Options of the relation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationParams {
    pub growth: GrowthParams,
    pub angle_min: f64,
}

impl Default for RelationParams {
    fn default() -> Self {
        Self {
            growth: GrowthParams::default(),
            angle_min: 1e-3,
        }
    }
}

fn saddle_patch_points(map: &dyn SurfaceMap, s: &SaddleRecord) -> Vec<PatchPoint> {
    let mut out = Vec::new();
    map.patches(s.point, &mut out);
    out
}

fn crossings_between(
    map: &dyn SurfaceMap,
    unstable: &[ManifoldCurve; 2],
    stable: &[ManifoldCurve; 2],
    saddles: [&SaddleRecord; 2],
    params: &RelationParams,
) -> Vec<Crossing> {
    // The saddles themselves are trivial intersections.
    let excluded: Vec<PatchPoint> = saddles.iter().flat_map(|s| saddle_patch_points(map, s)).collect();
    let mut out = Vec::new();
    for u in unstable {
        for s in stable {
            for c in transverse_intersections(u, s, params.angle_min) {
                let period = map.patch_period(c.patch);
                let trivial = excluded.iter().any(|e| {
                    e.patch == c.patch
                        && periodic_dist(reduce(e.coords, period), c.point, period) <= params.growth.h_min
                });
                if !trivial {
                    out.push(c);
                }
            }
        }
    }
    out
}

fn relation_from(
    map: &dyn SurfaceMap,
    p: (&SaddleRecord, &SaddleManifolds),
    q: (&SaddleRecord, &SaddleManifolds),
    params: &RelationParams,
) -> Relation {
    if p.0.s_index() != q.0.s_index() {
        return Relation {
            related: false,
            reason: RelationReason::IndexMismatch,
            forward: Vec::new(),
            backward: Vec::new(),
        };
    }
    let forward = crossings_between(map, &p.1.unstable, &q.1.stable, [p.0, q.0], params);
    let backward = crossings_between(map, &q.1.unstable, &p.1.stable, [p.0, q.0], params);
    let related = !forward.is_empty() && !backward.is_empty();
    let reason = if related {
        RelationReason::Related
    } else {
        RelationReason::NotFoundWithinBudget {
            forward: forward.is_empty(),
            backward: backward.is_empty(),
        }
    };
    Relation {
        related,
        reason,
        forward,
        backward,
    }
}

/// Whether `W^u(p) ⋔ W^s(q) ≠ ∅` and `W^u(q) ⋔ W^s(p) ≠ ∅` within the budget.
pub fn homoclinically_related(
    map: &dyn SurfaceMap,
    p: &SaddleRecord,
    q: &SaddleRecord,
    params: &RelationParams,
) -> Result<Relation> {
    let mp = grow_all(map, p, &params.growth)?;
    let mq = if p == q { mp.clone() } else { grow_all(map, q, &params.growth)? };
    Ok(relation_from(map, (p, &mp), (q, &mq), params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeKind {
    /// The pair was tested and related.
    Direct,
    /// The pair was already joined through other pairs.
    Closure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvidence {
    pub pair: (usize, usize),
    pub kind: MergeKind,
    pub forward: Vec<Crossing>,
    pub backward: Vec<Crossing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionClassPartition {
    pub saddles: Vec<SaddleRecord>,
    pub parent: Vec<usize>,
    pub evidence: Vec<MergeEvidence>,
    /// Pairs tested and not related, with the reason.
    pub unrelated: Vec<((usize, usize), RelationReason)>,
}

impl IntersectionClassPartition {
    fn new(saddles: Vec<SaddleRecord>) -> Self {
        let n = saddles.len();
        Self {
            saddles,
            parent: (0..n).collect(),
            evidence: Vec::new(),
            unrelated: Vec::new(),
        }
    }

    pub fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, i: usize, j: usize) {
        let (a, b) = (self.find(i), self.find(j));
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            self.parent[hi] = lo;
        }
    }

    /// Classes as sorted index lists, ordered by smallest member.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.saddles.len() {
            by_root.entry(self.find(i)).or_default().push(i);
        }
        by_root.into_values().collect()
    }

    pub fn class_count(&self) -> usize {
        self.classes().len()
    }
}

/// Union-find over pairwise relation tests. Pairs already in one class are
/// not retested and are recorded as closure merges.
pub fn intersection_classes(
    map: &dyn SurfaceMap,
    saddles: Vec<SaddleRecord>,
    params: &RelationParams,
) -> Result<IntersectionClassPartition> {
    let manifolds: Vec<SaddleManifolds> =
        saddles.iter().map(|s| grow_all(map, s, &params.growth)).collect::<Result<_>>()?;
    let mut part = IntersectionClassPartition::new(saddles);
    let n = part.saddles.len();
    for i in 0..n {
        for j in i + 1..n {
            if part.find(i) == part.find(j) {
                part.evidence.push(MergeEvidence {
                    pair: (i, j),
                    kind: MergeKind::Closure,
                    forward: Vec::new(),
                    backward: Vec::new(),
                });
                continue;
            }
            let rel = relation_from(
                map,
                (&part.saddles[i], &manifolds[i]),
                (&part.saddles[j], &manifolds[j]),
                params,
            );
            if rel.related {
                part.union(i, j);
                part.evidence.push(MergeEvidence {
                    pair: (i, j),
                    kind: MergeKind::Direct,
                    forward: rel.forward,
                    backward: rel.backward,
                });
            } else {
                part.unrelated.push(((i, j), rel.reason));
            }
        }
    }
    Ok(part)
}

/// A point with stable and unstable manifold size estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizedPoint {
    pub point: [f64; 2],
    pub stable_size: f64,
    pub unstable_size: f64,
}

/// Distance on `ℝ²/ℤ²`.
pub fn torus_distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    periodic_dist(*a, *b, [Some(1.0), Some(1.0)])
}

/// `d(x, y) ≤ η` for points whose manifolds both have size `≥ δ`. `η` is a
/// configuration surrogate: the existence of a suitable `η(δ)` is all that
/// is known.
pub fn proximity_intersection_test(
    x: &SizedPoint,
    y: &SizedPoint,
    eta: f64,
    delta: f64,
    metric: impl Fn(&[f64; 2], &[f64; 2]) -> f64,
) -> Result<bool> {
    if !(eta > 0.0 && delta > 0.0) {
        bail!(Parameter, "η and δ must be positive");
    }
    for p in [x, y] {
        if !(p.stable_size >= delta && p.unstable_size >= delta) {
            bail!(Precondition, "manifold sizes ({}, {}) below δ = {}", p.stable_size, p.unstable_size, delta);
        }
    }
    Ok(metric(&x.point, &y.point) <= eta)
}

/// Distance from `p` to the polyline (working coordinates).
pub fn distance_to_polyline(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    line.windows(2)
        .map(|w| {
            let d = sub(w[1], w[0]);
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = if len2 > 0.0 {
                (((p[0] - w[0][0]) * d[0] + (p[1] - w[0][1]) * d[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            dist(p, lerp(w[0], w[1], t))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Saddles of the blow-up in working coordinates of [`BlowupPolarMap`].
pub fn blowup_saddles(map: &BlowupPolarMap, m: &CatMap) -> Result<(SaddleRecord, SaddleRecord)> {
    let (p1, p2) = crate::systems::blowup_fixed_points(m);
    Ok((
        SaddleRecord::new(map, BlowupPolarMap::fiber_point(&p1), 1)?,
        SaddleRecord::new(map, BlowupPolarMap::fiber_point(&p2), 1)?,
    ))
}

#[cfg(test)]
mod tests {
    extern crate std;
    use super::*;
    use crate::math::sqrt;
    use crate::systems::{FIGURE8_P1, FIGURE8_P2};

    fn small_params() -> GrowthParams {
        GrowthParams {
            arclength: 2.0,
            ..GrowthParams::default()
        }
    }

    #[test]
    fn linear_plane_unstable_axis() {
        let map = PlaneLinearMap::new([[0.5, 0.0], [0.0, 2.0]]).unwrap();
        let s = SaddleRecord::new(&map, [0.0, 0.0], 1).unwrap();
        assert_eq!(s.eigenvalues, [0.5, 2.0]);
        let c = grow_manifold(&map, &s, Branch::Unstable, Side::Plus, &small_params()).unwrap();
        assert!(c.polyline.iter().all(|p| p[0] == 0.0 && p[1] >= 0.0));
        assert!(c.arclength >= 2.0);
        for w in c.polyline.windows(2) {
            assert!(dist(w[0], w[1]) <= 0.01 + 1e-15);
        }
        let st = grow_manifold(&map, &s, Branch::Stable, Side::Minus, &small_params()).unwrap();
        assert!(st.polyline.iter().all(|p| p[1] == 0.0 && p[0] <= 0.0));
    }

    #[test]
    fn cat_manifolds_are_eigenlines() {
        let m = CatMap::standard();
        let map = TorusLinearMap::new(&m);
        let s = SaddleRecord::new(&map, [0.0, 0.0], 1).unwrap();
        let slope_u = (sqrt(5.0) - 1.0) / 2.0;
        let params = GrowthParams::default();
        let c = grow_manifold(&map, &s, Branch::Unstable, Side::Plus, &params).unwrap();
        assert!(c.arclength >= 10.0);
        let dev = c
            .polyline
            .iter()
            .map(|p| (p[1] - slope_u * p[0]).abs() / sqrt(1.0 + slope_u * slope_u))
            .fold(0.0, f64::max);
        assert!(dev <= 1e-9, "{}", dev);
        let st = grow_manifold(&map, &s, Branch::Stable, Side::Plus, &params).unwrap();
        let x = transverse_intersections(&c, &st, 1e-3);
        assert!(x.len() > 1);
        for k in &x {
            assert!((k.angle - core::f64::consts::FRAC_PI_2).abs() < 1e-9, "{}", k.angle);
        }
    }

    #[test]
    fn straight_lines_cross_once_parallel_never() {
        let mk = |pts: Vec<[f64; 2]>| ManifoldCurve {
            branch: Branch::Unstable,
            side: Side::Plus,
            pieces: vec![PatchPolyline {
                patch: 0,
                period: [None, None],
                points: pts.clone(),
            }],
            polyline: pts,
            arclength: 0.0,
            flags: CurveFlags::default(),
            h_min: 1e-9,
            h_max: 0.1,
        };
        let a = mk((0..=20).map(|i| [i as f64 * 0.05, i as f64 * 0.05]).collect());
        let b = mk((0..=20).map(|i| [i as f64 * 0.05, 1.0 - i as f64 * 0.05 * 0.5]).collect());
        let x = transverse_intersections(&a, &b, 1e-3);
        assert_eq!(x.len(), 1);
        assert!((x[0].point[0] - 2.0 / 3.0).abs() < 1e-12);
        let d1: [f64; 2] = [1.0, 1.0];
        let d2: [f64; 2] = [1.0, -0.5];
        let truth = atan2((d1[0] * d2[1] - d1[1] * d2[0]).abs(), (d1[0] * d2[0] + d1[1] * d2[1]).abs());
        assert!((x[0].angle - truth).abs() < 1e-12);
        let c = mk((0..=20).map(|i| [i as f64 * 0.05, i as f64 * 0.05 + 0.1]).collect());
        assert!(transverse_intersections(&a, &c, 1e-3).is_empty());
    }

    #[test]
    fn figure8_separatrix_follows_level_set() {
        let sys = Figure8System::new(128).unwrap();
        let map = Figure8SubstepMap::new(sys);
        let s = SaddleRecord::new(&map, FIGURE8_P1, 1).unwrap();
        let params = GrowthParams {
            arclength: 6.0,
            tol: 1e-6,
            ..GrowthParams::default()
        };
        let c = grow_manifold(&map, &s, Branch::Unstable, Side::Plus, &params).unwrap();
        // Passes the other saddle (λ-lemma) and follows its unstable branch.
        let closest = c.polyline.iter().map(|p| dist(*p, FIGURE8_P2)).fold(f64::INFINITY, f64::min);
        assert!(closest < 1e-2, "{}", closest);
        let worst = c
            .polyline
            .iter()
            .map(|p| (crate::systems::hamiltonian(p) - 1.0).abs())
            .fold(0.0, f64::max);
        // O(h²) modified-energy offset of the leapfrog.
        assert!(worst < 0.02, "{}", worst);
    }

    #[test]
    fn invariance_of_unstable_branch() {
        let sys = Figure8System::new(64).unwrap();
        let map = Figure8SubstepMap::new(sys);
        let s = SaddleRecord::new(&map, FIGURE8_P1, 1).unwrap();
        let params = GrowthParams {
            arclength: 1.5,
            ..GrowthParams::default()
        };
        let c = grow_manifold(&map, &s, Branch::Unstable, Side::Plus, &params).unwrap();
        let n = c.polyline.len();
        for k in 0..200 {
            let i = 9 + k * (n / 2 - 10) / 200;
            let img = map.forward(c.polyline[i]);
            assert!(distance_to_polyline(img, &c.polyline) <= 5.0 * params.tol);
        }
    }

    #[test]
    fn blowup_saddles_have_expected_eigenvalues() {
        let m = CatMap::standard();
        let map = BlowupPolarMap::new(&m).unwrap();
        let (p1, p2) = blowup_saddles(&map, &m).unwrap();
        let l = m.lambda();
        // p1: λ transverse (unstable), λ^{-2} along C.
        assert!((p1.eigenvalues[1] - l).abs() < 1e-12 && (p1.eigenvalues[0] - 1.0 / (l * l)).abs() < 1e-12);
        assert!((p2.eigenvalues[1] - l * l).abs() < 1e-12 && (p2.eigenvalues[0] - 1.0 / l).abs() < 1e-12);
        assert!(p1.eigenvectors[1][1].abs() < 1e-12);
        assert!(p2.eigenvectors[1][0].abs() < 1e-12);
    }

    #[test]
    fn blowup_fiber_branches_stall() {
        let m = CatMap::standard();
        let map = BlowupPolarMap::new(&m).unwrap();
        let (_, p2) = blowup_saddles(&map, &m).unwrap();
        let c = grow_manifold(&map, &p2, Branch::Unstable, Side::Plus, &small_params()).unwrap();
        assert!(c.flags.stalled);
        assert!(c.polyline.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn self_relation_and_symmetry() {
        let m = CatMap::standard();
        let map = TorusLinearMap::new(&m);
        let o = SaddleRecord::new(&map, [0.0, 0.0], 1).unwrap();
        let q = SaddleRecord::new(&map, [1.0 / 3.0, 0.0], 4).unwrap();
        let params = RelationParams {
            growth: GrowthParams {
                arclength: 3.0,
                ..GrowthParams::default()
            },
            angle_min: 1e-3,
        };
        assert!(homoclinically_related(&map, &o, &o, &params).unwrap().related);
        let a = homoclinically_related(&map, &o, &q, &params).unwrap();
        let b = homoclinically_related(&map, &q, &o, &params).unwrap();
        assert!(a.related && b.related);
        assert_eq!(a.forward.len(), b.backward.len());
    }

    #[test]
    fn proximity_examples() {
        let x = SizedPoint {
            point: [0.1, 0.2],
            stable_size: 0.2,
            unstable_size: 0.2,
        };
        let y = SizedPoint {
            point: [0.9, 0.2],
            ..x
        };
        assert!(proximity_intersection_test(&x, &x, 1e-9, 0.1, torus_distance).unwrap());
        assert!(proximity_intersection_test(&x, &y, 0.25, 0.1, torus_distance).unwrap());
        assert!(!proximity_intersection_test(&x, &y, 0.1, 0.1, torus_distance).unwrap());
        let small = SizedPoint { stable_size: 0.01, ..x };
        assert!(proximity_intersection_test(&small, &y, 0.1, 0.1, torus_distance).is_err());
    }
}
