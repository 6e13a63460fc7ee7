//! The blow-up `S` of `T²` at the fixed point `0` of a cat map.
//!
//! Off the exceptional fiber `C` a point is a torus point, stored in centered
//! coordinates `[−½, ½)²` so that points near `0` keep full relative
//! precision. Near `C` two affine charts are used:
//!
//! ```text
//! chart 1: (x, u), u = y/x,   (x, y) = (x, u·x)
//! chart 2: (y, v), v = x/y,   (x, y) = (v·y, y)
//! ```
//!
//! and `C` itself is `{x = 0}` (resp. `{y = 0}`), a copy of `ℝP¹`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CatMap, PeriodicOrbitRecord, RationalPoint};
use crate::cocycle::OrbitSegment;
use crate::error::{bail, Result};
use crate::linalg::{apply2, eigen2, mul2, Eigen2, Mat2, Vec2};
use crate::math::{atan2, cos, exp, hypot, sin};
use crate::wstar::{torus_fourier_family, TestFn, TestFunction, TestFunctionFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    One,
    Two,
}

impl Chart {
    pub fn other(self) -> Self {
        match self {
            Chart::One => Chart::Two,
            Chart::Two => Chart::One,
        }
    }
}

/// Reduces each coordinate to `[−½, ½)`.
pub fn centered(p: [f64; 2]) -> [f64; 2] {
    let c = |x: f64| {
        let y = x - libm::floor(x + 0.5);
        if y >= 0.5 {
            y - 1.0
        } else {
            y
        }
    };
    [c(p[0]), c(p[1])]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BlowupPoint {
    /// A point of `T² \ {0}` in centered coordinates.
    Torus([f64; 2]),
    /// A direction on `C`: `u = y/x` in chart 1 or `v = x/y` in chart 2.
    Exceptional { chart: Chart, coord: f64 },
}

impl BlowupPoint {
    /// A torus point; `(0, 0)` is rejected.
    pub fn torus(p: [f64; 2]) -> Result<Self> {
        let c = centered(p);
        if c == [0.0, 0.0] {
            bail!(Parameter, "(0, 0) is blown up; give a direction on C instead");
        }
        Ok(BlowupPoint::Torus(c))
    }

    /// The point of `C` with direction `d ≠ 0`, in the chart with `|coord| ≤ 1`.
    pub fn direction(d: Vec2) -> Self {
        if d[0].abs() >= d[1].abs() {
            BlowupPoint::Exceptional {
                chart: Chart::One,
                coord: d[1] / d[0],
            }
        } else {
            BlowupPoint::Exceptional {
                chart: Chart::Two,
                coord: d[0] / d[1],
            }
        }
    }

    pub fn on_c(&self) -> bool {
        matches!(self, BlowupPoint::Exceptional { .. })
    }

    /// The blow-down `π: S → T²` in centered coordinates.
    pub fn project(&self) -> [f64; 2] {
        match *self {
            BlowupPoint::Torus(p) => p,
            BlowupPoint::Exceptional { .. } => [0.0, 0.0],
        }
    }

    /// Euclidean norm of the projection (distance to `0` on the torus).
    pub fn radius(&self) -> f64 {
        let p = self.project();
        hypot(p[0], p[1])
    }

    /// A representative direction vector: the point itself off `C`.
    pub fn direction_vector(&self) -> Vec2 {
        match *self {
            BlowupPoint::Torus(p) => p,
            BlowupPoint::Exceptional {
                chart: Chart::One,
                coord,
            } => [1.0, coord],
            BlowupPoint::Exceptional {
                chart: Chart::Two,
                coord,
            } => [coord, 1.0],
        }
    }

    /// Angle of the direction modulo `π`, in `(−π/2, π/2]`.
    pub fn angle(&self) -> f64 {
        let d = self.direction_vector();
        let mut t = atan2(d[1], d[0]);
        if t <= -core::f64::consts::FRAC_PI_2 {
            t += core::f64::consts::PI;
        } else if t > core::f64::consts::FRAC_PI_2 {
            t -= core::f64::consts::PI;
        }
        t
    }

    /// Chart coordinates, `None` where the chart does not cover the point.
    pub fn chart_coords(&self, chart: Chart) -> Option<[f64; 2]> {
        match (*self, chart) {
            (BlowupPoint::Torus([x, y]), Chart::One) => (x != 0.0).then(|| [x, y / x]),
            (BlowupPoint::Torus([x, y]), Chart::Two) => (y != 0.0).then(|| [y, x / y]),
            (BlowupPoint::Exceptional { chart: c, coord }, _) if c == chart => Some([0.0, coord]),
            (BlowupPoint::Exceptional { coord, .. }, _) => {
                (coord != 0.0).then(|| [0.0, 1.0 / coord])
            }
        }
    }

    /// The chart in which the direction coordinate has modulus ≤ 1.
    pub fn preferred_chart(&self) -> Chart {
        let d = self.direction_vector();
        if d[0].abs() >= d[1].abs() {
            Chart::One
        } else {
            Chart::Two
        }
    }

    /// Inverse of [`chart_coords`](Self::chart_coords).
    pub fn from_chart(chart: Chart, c: [f64; 2]) -> Self {
        let [s, w] = c;
        if s == 0.0 {
            return BlowupPoint::Exceptional { chart, coord: w }.normalized();
        }
        let p = match chart {
            Chart::One => [s, w * s],
            Chart::Two => [w * s, s],
        };
        let q = centered(p);
        if q == [0.0, 0.0] {
            BlowupPoint::direction(p)
        } else {
            BlowupPoint::Torus(q)
        }
    }

    /// Exceptional points are moved to the chart with `|coord| ≤ 1`.
    pub fn normalized(self) -> Self {
        match self {
            BlowupPoint::Exceptional { chart, coord } if coord.abs() > 1.0 => {
                BlowupPoint::Exceptional {
                    chart: chart.other(),
                    coord: 1.0 / coord,
                }
            }
            p => p,
        }
    }
}

/// The lift `f_A` of the cat map to `S`.
pub fn blowup_apply(m: &CatMap, p: &BlowupPoint) -> BlowupPoint {
    let a = m.as_mat2();
    match p {
        BlowupPoint::Torus(x) => {
            let y = centered(apply2(&a, x));
            if y == [0.0, 0.0] {
                // Only reachable through round-off for |x| ~ 1e-300.
                BlowupPoint::direction(apply2(&a, x))
            } else {
                BlowupPoint::Torus(y)
            }
        }
        e => BlowupPoint::direction(apply2(&a, &e.direction_vector())),
    }
}

/// The inverse lift `f_A⁻¹`.
pub fn blowup_apply_inverse(m: &CatMap, p: &BlowupPoint) -> BlowupPoint {
    let inv = CatMap::new(m.inverse_matrix()).expect("inverse of a hyperbolic matrix");
    blowup_apply(&inv, p)
}

/// The lift in chart coordinates, `x' = x(a + bu)`, `u' = (c + du)/(a + bu)`
/// for chart 1 and symmetrically for chart 2. `None` at the pole.
pub fn blowup_chart_map(m: &CatMap, chart: Chart, c: [f64; 2]) -> Option<[f64; 2]> {
    let [[a, b], [cc, d]] = m.as_mat2();
    let [s, w] = c;
    match chart {
        Chart::One => {
            let den = a + b * w;
            (den != 0.0).then(|| [s * den, (cc + d * w) / den])
        }
        Chart::Two => {
            let den = cc * w + d;
            (den != 0.0).then(|| [s * den, (a * w + b) / den])
        }
    }
}

/// Jacobian of [`blowup_chart_map`] at `c`.
pub fn blowup_chart_jacobian(m: &CatMap, chart: Chart, c: [f64; 2]) -> Option<Mat2> {
    let [[a, b], [cc, d]] = m.as_mat2();
    let [s, w] = c;
    let (den, dden, num) = match chart {
        Chart::One => (a + b * w, b, cc + d * w),
        Chart::Two => (cc * w + d, cc, a * w + b),
    };
    if den == 0.0 {
        return None;
    }
    let dnum = match chart {
        Chart::One => d,
        Chart::Two => a,
    };
    Some([
        [den, s * dden],
        [0.0, (dnum * den - num * dden) / (den * den)],
    ])
}

/// A fixed point of `f_A` on `C` with its eigen-data in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFixedPoint {
    pub point: BlowupPoint,
    pub chart: Chart,
    /// Eigenvalue transverse to `C` (first) and along `C` (second).
    pub eigenvalues: [f64; 2],
    /// Matching unit eigenvectors in chart coordinates.
    pub eigenvectors: [Vec2; 2],
    /// Central-difference Jacobian of [`blowup_apply`] in chart coordinates.
    pub numerical_jacobian: Mat2,
    /// Largest deviation between numerical and analytic eigenvalues.
    pub eigen_residual: f64,
}

impl BlowupFixedPoint {
    /// Direction slope `u = y/x` (infinite for the vertical direction).
    pub fn slope(&self) -> f64 {
        let d = self.point.direction_vector();
        d[1] / d[0]
    }

    /// `(stable, unstable)` eigenvalues and eigenvectors, for manifold growth.
    pub fn saddle_data(&self) -> ([f64; 2], [Vec2; 2]) {
        if self.eigenvalues[0].abs() < 1.0 {
            (self.eigenvalues, self.eigenvectors)
        } else {
            (
                [self.eigenvalues[1], self.eigenvalues[0]],
                [self.eigenvectors[1], self.eigenvectors[0]],
            )
        }
    }
}

/// Central differences of [`blowup_apply`] in the given chart.
pub fn blowup_numerical_jacobian(m: &CatMap, chart: Chart, c: [f64; 2], h: f64) -> Mat2 {
    let eval = |s: f64, w: f64| {
        let p = BlowupPoint::from_chart(chart, [s, w]);
        blowup_apply(m, &p)
            .chart_coords(chart)
            .expect("image stays in the chart near a fixed point")
    };
    let mut j = [[0.0; 2]; 2];
    for col in 0..2 {
        let mut plus = c;
        let mut minus = c;
        plus[col] += h;
        minus[col] -= h;
        let fp = eval(plus[0], plus[1]);
        let fm = eval(minus[0], minus[1]);
        for row in 0..2 {
            j[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    j
}

/// The two fixed points of `f_A` on `C`: `p1` in the unstable direction with
/// eigenvalues `(λ, λ⁻²)` and `p2` in the stable direction with
/// `(λ⁻¹, λ²)`. The fixed directions solve `b·u² + (a − d)·u − c = 0`.
pub fn blowup_fixed_points(m: &CatMap) -> (BlowupFixedPoint, BlowupFixedPoint) {
    let (ls, lu) = m.eigenvalues();
    let (vs, vu) = m.eigenvectors();
    let make = |dir: Vec2, mu: f64| {
        let point = BlowupPoint::direction(dir);
        let chart = point.preferred_chart();
        let c = point.chart_coords(chart).expect("preferred chart covers the point");
        let eigenvalues = [mu, 1.0 / (mu * mu)];
        let numerical_jacobian = blowup_numerical_jacobian(m, chart, c, 1e-6);
        let eigen_residual = match eigen2(&numerical_jacobian) {
            Eigen2::Real { values, .. } => {
                let mut want = eigenvalues;
                want.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
                (values[0] - want[0])
                    .abs()
                    .max((values[1] - want[1]).abs())
            }
            Eigen2::Complex { .. } => f64::INFINITY,
        };
        let analytic = blowup_chart_jacobian(m, chart, c).expect("no pole at a fixed point");
        // Upper triangular at s = 0: transverse vector (1, 0), along-C vector
        // from the second column.
        let along = {
            let lam = analytic[1][1];
            let v = [analytic[0][1], lam - analytic[0][0]];
            if v == [0.0, 0.0] {
                [0.0, 1.0]
            } else {
                crate::linalg::normalize2(&v)
            }
        };
        BlowupFixedPoint {
            point,
            chart,
            eigenvalues,
            eigenvectors: [[1.0, 0.0], along],
            numerical_jacobian,
            eigen_residual,
        }
    };
    (make(vu, lu), make(vs, ls))
}

/// Visits of a lifted orbit to chart balls around `p1` and `p2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationSummary {
    pub radius: f64,
    pub visits_p1: usize,
    pub visits_p2: usize,
    /// `visits_p1 / visits_p2`; `None` if either count is zero.
    pub ratio: Option<f64>,
    /// Metric used for the balls.
    pub metric: alloc::string::String,
}

impl OccupationSummary {
    /// `|log ratio|`, infinite when the ratio is undefined.
    pub fn log_deviation(&self) -> f64 {
        self.ratio.map_or(f64::INFINITY, |r| libm::log(r).abs())
    }
}

/// Chart distance `√(s² + (w − w_fix)²)` to a fixed point of `f_A` on `C`,
/// measured in the chart containing the fixed direction.
pub fn near_c_distance(fixed: &BlowupFixedPoint, p: &BlowupPoint) -> f64 {
    let w_fix = fixed
        .point
        .chart_coords(fixed.chart)
        .expect("fixed point lies in its chart")[1];
    match p.chart_coords(fixed.chart) {
        Some([s, w]) => hypot(s, w - w_fix),
        None => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedOrbit {
    pub orbit: PeriodicOrbitRecord<BlowupPoint>,
    pub summary: OccupationSummary,
}

/// Derivative of the chart map `(x, y) ↦ (s, w)` at a torus point.
fn chart_derivative(chart: Chart, [x, y]: [f64; 2]) -> Mat2 {
    match chart {
        Chart::One => [[1.0, 0.0], [-y / (x * x), 1.0 / x]],
        Chart::Two => [[0.0, 1.0], [1.0 / y, -x / (y * y)]],
    }
}

/// Derivative of the inverse chart `(s, w) ↦ (x, y)`.
fn chart_inverse_derivative(chart: Chart, [s, w]: [f64; 2]) -> Mat2 {
    match chart {
        Chart::One => [[1.0, 0.0], [w, s]],
        Chart::Two => [[w, s], [1.0, 0.0]],
    }
}

impl LiftedOrbit {
    /// One period as a cocycle segment in chart coordinates: each point in
    /// its preferred chart, Jacobians including the chart transitions.
    pub fn orbit_segment(&self, m: &CatMap) -> Result<OrbitSegment> {
        let pts = &self.orbit.points;
        let n = pts.len();
        let a = m.as_mat2();
        let mut coords = Vec::with_capacity(n);
        let mut jacobians = Vec::with_capacity(n);
        for i in 0..n {
            let (here, next) = (pts[i], pts[(i + 1) % n]);
            let (BlowupPoint::Torus(_), BlowupPoint::Torus(y)) = (here, next) else {
                bail!(Precondition, "lifted orbit meets C");
            };
            let (ci, cn) = (here.preferred_chart(), next.preferred_chart());
            let c = here.chart_coords(ci).expect("preferred chart covers the point");
            coords.push(c);
            let j = mul2(&chart_derivative(cn, y), &mul2(&a, &chart_inverse_derivative(ci, c)));
            jacobians.push(j);
        }
        OrbitSegment::planar(coords, jacobians, Some(n))
    }
}

/// Lifts a cat-map periodic orbit avoiding `0` to `S` and counts visits to
/// the radius-`r` chart balls around `p1` and `p2`.
pub fn blowup_lift_orbit(
    m: &CatMap,
    orbit: &PeriodicOrbitRecord<RationalPoint>,
    radius: f64,
) -> Result<LiftedOrbit> {
    if orbit.points.iter().any(|p| p.num == [0, 0]) {
        bail!(Precondition, "orbit passes through the blown-up point (0, 0)");
    }
    let points: Vec<BlowupPoint> = orbit
        .points
        .iter()
        .map(|p| BlowupPoint::torus(p.to_f64()))
        .collect::<Result<_>>()?;
    let (p1, p2) = blowup_fixed_points(m);
    let visits_p1 = points.iter().filter(|x| near_c_distance(&p1, x) < radius).count();
    let visits_p2 = points.iter().filter(|x| near_c_distance(&p2, x) < radius).count();
    let ratio = (visits_p1 > 0 && visits_p2 > 0).then(|| visits_p1 as f64 / visits_p2 as f64);
    Ok(LiftedOrbit {
        orbit: PeriodicOrbitRecord {
            representative: points[0],
            period: orbit.period,
            exponents: orbit.exponents,
            points,
        },
        summary: OccupationSummary {
            radius,
            visits_p1,
            visits_p2,
            ratio,
            metric: "chart distance sqrt(s^2 + (w - w_fix)^2)".into(),
        },
    })
}

/// Parameters of the default family on the blow-up surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupFamilyParams {
    /// Highest torus frequency of the pulled-back Fourier modes.
    pub max_freq: i32,
    /// Highest angular harmonic `j` in `cos/sin(2jθ)`.
    pub max_harmonic: u32,
    /// Width `ρ` of the radial window `exp(−r²/(2ρ²))`.
    pub rho: f64,
}

impl Default for BlowupFamilyParams {
    fn default() -> Self {
        Self {
            max_freq: 3,
            max_harmonic: 2,
            rho: 0.1,
        }
    }
}

/// Default family on `S`: windowed angular modes `w(r)·{1, cos 2jθ, sin 2jθ}`
/// around `C` (these separate points of `C`), followed by the torus Fourier
/// modes composed with the blow-down. Here `r` is the torus distance to `0`
/// and `θ` the direction angle, which is continuous on `S` modulo `π`. Every
/// member has sup norm exactly 1.
pub fn blowup_family(params: BlowupFamilyParams) -> TestFunctionFamily<BlowupPoint> {
    let rho = params.rho;
    let window = move |p: &BlowupPoint| {
        let r = p.radius();
        exp(-r * r / (2.0 * rho * rho))
    };
    let mut functions: Vec<TestFunction<BlowupPoint>> = Vec::new();
    functions.push(TestFunction {
        label: "w(r)".into(),
        eval: Arc::new(window),
        sup_norm: 1.0,
    });
    for j in 1..=params.max_harmonic {
        let k = 2.0 * j as f64;
        functions.push(TestFunction {
            label: format!("w(r)·cos({}θ)", 2 * j),
            eval: Arc::new(move |p: &BlowupPoint| window(p) * cos(k * p.angle())),
            sup_norm: 1.0,
        });
        functions.push(TestFunction {
            label: format!("w(r)·sin({}θ)", 2 * j),
            eval: Arc::new(move |p: &BlowupPoint| window(p) * sin(k * p.angle())),
            sup_norm: 1.0,
        });
    }
    for f in torus_fourier_family(params.max_freq).functions() {
        let g = f.eval.clone();
        functions.push(TestFunction {
            label: format!("{}∘π", f.label),
            eval: Arc::new(move |p: &BlowupPoint| g(&p.project())) as TestFn<BlowupPoint>,
            sup_norm: 1.0,
        });
    }
    TestFunctionFamily::new("blowup-angular-fourier", functions).expect("nonempty family")
}
