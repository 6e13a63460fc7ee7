//! Atomic measures and the truncated weak* metric
//!
//! ```text
//! D_K(μ, ν) = Σ_{n=1}^{K} (2^n ‖φ_n‖_∞)^{-1} |∫φ_n dμ − ∫φ_n dν|
//! ```
//!
//! over a dense family of test functions `φ_n`. For probability measures the
//! omitted tail is at most `2^{1−K}`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::math::{cos, exp, sin, PI};
use crate::sum::{sum, CompensatedSum};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Reduces torus coordinates to `[0, 1)`.
pub fn torus_reduce(p: [f64; 2]) -> [f64; 2] {
    let r = |x: f64| {
        let y = x - libm::floor(x);
        if y >= 1.0 {
            0.0
        } else {
            y
        }
    };
    [r(p[0]), r(p[1])]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom<P> {
    pub point: P,
    pub weight: f64,
}

/// A finitely supported probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure<P = [f64; 2]> {
    atoms: Vec<Atom<P>>,
}

impl<P: Clone> EmpiricalMeasure<P> {
    /// Validates nonnegative weights summing to one within [`MASS_TOLERANCE`].
    pub fn new(atoms: Vec<Atom<P>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("measure has no atoms".into()));
        }
        if let Some(a) = atoms.iter().find(|a| !(a.weight >= 0.0)) {
            bail!(Parameter, "negative or NaN weight {}", a.weight);
        }
        let mass = sum(atoms.iter().map(|a| a.weight));
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            bail!(Parameter, "total mass {} differs from 1", mass);
        }
        Ok(Self { atoms })
    }

    pub fn dirac(point: P) -> Self {
        Self {
            atoms: alloc::vec![Atom { point, weight: 1.0 }],
        }
    }

    /// Equal weights on the given points (an orbit measure).
    pub fn uniform(points: Vec<P>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("measure has no atoms".into()));
        }
        let w = 1.0 / points.len() as f64;
        Ok(Self {
            atoms: points
                .into_iter()
                .map(|point| Atom { point, weight: w })
                .collect(),
        })
    }

    pub fn atoms(&self) -> &[Atom<P>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        sum(self.atoms.iter().map(|a| a.weight))
    }

    /// Atoms with weight exactly zero removed.
    pub fn pruned(&self) -> Self {
        Self {
            atoms: self.atoms.iter().filter(|a| a.weight > 0.0).cloned().collect(),
        }
    }

    pub fn map_points<Q: Clone>(&self, f: impl Fn(&P) -> Q) -> EmpiricalMeasure<Q> {
        EmpiricalMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    point: f(&a.point),
                    weight: a.weight,
                })
                .collect(),
        }
    }
}

impl EmpiricalMeasure<[f64; 2]> {
    /// Measure on the torus; coordinates are reduced to `[0, 1)`.
    pub fn on_torus(atoms: Vec<Atom<[f64; 2]>>) -> Result<Self> {
        Self::new(
            atoms
                .into_iter()
                .map(|a| Atom {
                    point: torus_reduce(a.point),
                    weight: a.weight,
                })
                .collect(),
        )
    }
}

/// `∫φ dμ = Σ w_i φ(x_i)`, compensated.
pub fn integrate<P>(mu: &EmpiricalMeasure<P>, phi: impl Fn(&P) -> f64) -> f64 {
    let mut s = CompensatedSum::new();
    for a in &mu.atoms {
        s.add(a.weight * phi(&a.point));
    }
    s.value()
}

/// Barycentric weights `s_j ∈ [0, 1]`, `Σ s_j = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexWeights(Vec<f64>);

impl ConvexWeights {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Empty("no convex weights".into()));
        }
        if let Some(x) = s.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            bail!(Parameter, "convex weight {} outside [0, 1]", x);
        }
        let total = sum(s.iter().copied());
        if (total - 1.0).abs() > MASS_TOLERANCE {
            bail!(Parameter, "convex weights sum to {}", total);
        }
        Ok(Self(s))
    }

    /// The vertex `e_j` of the standard simplex with `k` vertices.
    pub fn vertex(k: usize, j: usize) -> Self {
        let mut s = alloc::vec![0.0; k];
        s[j] = 1.0;
        Self(s)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `Σ s_j μ_j`: the union of the atoms with weights scaled by `s_j`.
pub fn convex_combine<P: Clone>(
    measures: &[EmpiricalMeasure<P>],
    s: &ConvexWeights,
) -> Result<EmpiricalMeasure<P>> {
    if measures.len() != s.0.len() {
        bail!(
            Dimension,
            "{} measures but {} convex weights",
            measures.len(),
            s.0.len()
        );
    }
    let atoms = measures
        .iter()
        .zip(&s.0)
        .flat_map(|(m, &sj)| {
            m.atoms.iter().map(move |a| Atom {
                point: a.point.clone(),
                weight: sj * a.weight,
            })
        })
        .collect();
    EmpiricalMeasure::new(atoms)
}

pub type TestFn<P> = Arc<dyn Fn(&P) -> f64 + Send + Sync>;

/// One member `φ_n` of a test-function family with its sup norm.
#[derive(Clone)]
pub struct TestFunction<P> {
    pub label: String,
    pub eval: TestFn<P>,
    pub sup_norm: f64,
}

impl<P> core::fmt::Debug for TestFunction<P> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

/// An ordered family `φ_1, φ_2, …` used by the weak* metric, truncated at `K`.
#[derive(Clone, Debug)]
pub struct TestFunctionFamily<P> {
    name: String,
    functions: Vec<TestFunction<P>>,
    truncation: usize,
}

impl<P> TestFunctionFamily<P> {
    pub fn new(name: impl Into<String>, functions: Vec<TestFunction<P>>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Parameter("test-function family is empty".into()));
        }
        if let Some(f) = functions.iter().find(|f| !(f.sup_norm > 0.0)) {
            bail!(Parameter, "sup norm of {} must be positive", f.label);
        }
        let truncation = functions.len();
        Ok(Self {
            name: name.into(),
            functions,
            truncation,
        })
    }

    /// Keeps the first `k` functions (`k ≥ 1`, at most the family size).
    pub fn truncated(mut self, k: usize) -> Result<Self> {
        if k == 0 || k > self.functions.len() {
            bail!(
                Parameter,
                "truncation K = {} outside 1..={}",
                k,
                self.functions.len()
            );
        }
        self.truncation = k;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn functions(&self) -> &[TestFunction<P>] {
        &self.functions[..self.truncation]
    }

    /// `2^{1−K}`, the bound on `|D − D_K|` for probability measures.
    pub fn tail_bound(&self) -> f64 {
        libm::pow(2.0, 1.0 - self.truncation as f64)
    }

    /// `(2^n ‖φ_n‖_∞)^{-1}` for `n = 1, …, K`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.functions()
            .iter()
            .enumerate()
            .map(|(i, f)| 1.0 / (libm::pow(2.0, (i + 1) as f64) * f.sup_norm))
            .collect()
    }

    /// `(∫φ_n dμ)_{n ≤ K}`.
    pub fn integrals(&self, mu: &EmpiricalMeasure<P>) -> Vec<f64> {
        self.functions()
            .iter()
            .map(|f| integrate(mu, |p| (f.eval)(p)))
            .collect()
    }

    /// `D_K` between two integral vectors.
    pub fn distance_from_integrals(&self, a: &[f64], b: &[f64]) -> f64 {
        sum(self
            .coefficients()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(c, (x, y))| c * (x - y).abs()))
    }
}

/// `D_K(μ, ν)`.
pub fn wstar_distance<P>(
    mu: &EmpiricalMeasure<P>,
    nu: &EmpiricalMeasure<P>,
    family: &TestFunctionFamily<P>,
) -> f64 {
    family.distance_from_integrals(&family.integrals(mu), &family.integrals(nu))
}

/// A distance together with the truncation metadata needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub distance: f64,
    pub truncation: usize,
    pub tail_bound: f64,
    pub family: String,
}

pub fn wstar_distance_report<P>(
    mu: &EmpiricalMeasure<P>,
    nu: &EmpiricalMeasure<P>,
    family: &TestFunctionFamily<P>,
) -> DistanceReport {
    DistanceReport {
        distance: wstar_distance(mu, nu, family),
        truncation: family.truncation(),
        tail_bound: family.tail_bound(),
        family: family.name().into(),
    }
}

/// Minimum of `D_K(ν, Σ s_j μ_j)` over the barycentric grid `s ∈ (ℕ/m)^k`.
///
/// Integrals are affine in the measure, so the objective is evaluated from
/// the vertex integral vectors without forming the combinations.
pub fn distance_to_simplex<P>(
    nu: &EmpiricalMeasure<P>,
    vertices: &[EmpiricalMeasure<P>],
    family: &TestFunctionFamily<P>,
    grid_m: usize,
) -> Result<(f64, ConvexWeights)> {
    if vertices.is_empty() {
        return Err(Error::Empty("no simplex vertices".into()));
    }
    if grid_m == 0 {
        return Err(Error::Parameter("grid denominator must be ≥ 1".into()));
    }
    let target = family.integrals(nu);
    let vertex_integrals: Vec<Vec<f64>> = vertices.iter().map(|v| family.integrals(v)).collect();
    let k = vertices.len();
    let mut counts = alloc::vec![0usize; k];
    counts[0] = grid_m;
    let mut best = (f64::INFINITY, counts.clone());
    let mut mixed = alloc::vec![0.0; target.len()];
    loop {
        for (n, slot) in mixed.iter_mut().enumerate() {
            *slot = sum((0..k).map(|j| counts[j] as f64 / grid_m as f64 * vertex_integrals[j][n]));
        }
        let d = family.distance_from_integrals(&target, &mixed);
        if d < best.0 {
            best = (d, counts.clone());
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    let weights = best.1.iter().map(|&c| c as f64 / grid_m as f64).collect();
    Ok((best.0, ConvexWeights(weights)))
}

/// Advances `counts` to the next weak composition of the same total in
/// reverse-lexicographic order; false after the last.
fn next_composition(counts: &mut [usize]) -> bool {
    let k = counts.len();
    if k < 2 {
        return false;
    }
    // Find the rightmost position (excluding the last) with a positive count.
    let Some(i) = (0..k - 1).rev().find(|&i| counts[i] > 0) else {
        return false;
    };
    counts[i] -= 1;
    let tail: usize = counts[i + 1..].iter().sum::<usize>() + 1;
    for c in &mut counts[i + 1..] {
        *c = 0;
    }
    counts[i + 1] = tail;
    true
}

/// Real trigonometric mode `cos` or `sin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    fn eval(self, angle: f64) -> f64 {
        match self {
            Trig::Cos => cos(angle),
            Trig::Sin => sin(angle),
        }
    }
}

/// Frequency representatives `(k1, k2)` with `|k1|, |k2| ≤ max_freq`, one per
/// `±k` pair, ordered by `|k1| + |k2|` then lexicographically.
pub fn torus_frequencies(max_freq: i32) -> Vec<(i32, i32)> {
    let mut reps: Vec<(i32, i32)> = (-max_freq..=max_freq)
        .flat_map(|k1| (-max_freq..=max_freq).map(move |k2| (k1, k2)))
        .filter(|&(k1, k2)| k1 > 0 || (k1 == 0 && k2 > 0))
        .collect();
    reps.sort_by_key(|&(k1, k2)| (k1.abs() + k2.abs(), k1, k2));
    reps
}

/// The default family on `T²`: `cos` and `sin` of `2π(k1 x1 + k2 x2)` over
/// [`torus_frequencies`], sup norm exactly 1. With `max_freq = 3` it has
/// 48 members.
pub fn torus_fourier_family(max_freq: i32) -> TestFunctionFamily<[f64; 2]> {
    let functions = torus_frequencies(max_freq)
        .into_iter()
        .flat_map(|(k1, k2)| {
            [Trig::Cos, Trig::Sin].into_iter().map(move |t| TestFunction {
                label: format!("{:?}({},{})", t, k1, k2).to_lowercase(),
                eval: Arc::new(move |p: &[f64; 2]| {
                    t.eval(2.0 * PI * (k1 as f64 * p[0] + k2 as f64 * p[1]))
                }) as TestFn<[f64; 2]>,
                sup_norm: 1.0,
            })
        })
        .collect();
    TestFunctionFamily::new(format!("torus-fourier-{}", max_freq), functions)
        .expect("nonempty family")
}

/// Grid estimate of `sup |φ|` over a rectangle, inflated by `safety`.
pub fn grid_sup_norm(
    phi: &dyn Fn(&[f64; 2]) -> f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    grid: usize,
    safety: f64,
) -> f64 {
    let mut best = 0.0f64;
    for i in 0..grid {
        let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / (grid - 1) as f64;
        for j in 0..grid {
            let y = y_range.0 + (y_range.1 - y_range.0) * j as f64 / (grid - 1) as f64;
            best = best.max(phi(&[x, y]).abs());
        }
    }
    best * safety
}

/// Parameters of the Gaussian-windowed cylinder family on `S¹ × ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderFamilyParams {
    /// Highest `x` frequency.
    pub max_freq: i32,
    /// Highest power of `y`.
    pub max_power: u32,
    /// Window width `σ` in `exp(−y²/(2σ²))`.
    pub sigma: f64,
    /// Sup norms are estimated on `grid × grid` points of
    /// `[0, 1] × [−y_extent, y_extent]` and multiplied by `safety`.
    pub y_extent: f64,
    pub grid: usize,
    pub safety: f64,
}

impl Default for CylinderFamilyParams {
    fn default() -> Self {
        Self {
            max_freq: 3,
            max_power: 2,
            sigma: 1.0,
            y_extent: 4.0,
            grid: 400,
            safety: 1.05,
        }
    }
}

/// Default family on the cylinder `S¹ × ℝ`: products of `1, cos, sin` of
/// `2πkx` (`k ≤ max_freq`) with `y^j exp(−y²/(2σ²))` (`j ≤ max_power`),
/// ordered by `k + j`, then `k`, then `j`, cos before sin.
pub fn cylinder_family(params: CylinderFamilyParams) -> TestFunctionFamily<[f64; 2]> {
    let mut specs: Vec<(i32, u32, Option<Trig>)> = Vec::new();
    for k in 0..=params.max_freq {
        for j in 0..=params.max_power {
            if k == 0 {
                specs.push((0, j, None));
            } else {
                specs.push((k, j, Some(Trig::Cos)));
                specs.push((k, j, Some(Trig::Sin)));
            }
        }
    }
    specs.sort_by_key(|&(k, j, t)| (k as u32 + j, k, j, t.map_or(0, |t| t as u8 + 1)));
    let sigma = params.sigma;
    let functions = specs
        .into_iter()
        .map(|(k, j, t)| {
            let eval: TestFn<[f64; 2]> = Arc::new(move |p: &[f64; 2]| {
                let xpart = t.map_or(1.0, |t| t.eval(2.0 * PI * k as f64 * p[0]));
                let y = p[1];
                xpart * libm::pow(y, j as f64) * exp(-y * y / (2.0 * sigma * sigma))
            });
            let sup_norm = grid_sup_norm(
                &*eval,
                (0.0, 1.0),
                (-params.y_extent, params.y_extent),
                params.grid,
                params.safety,
            );
            let label = match t {
                None => format!("y^{}·w", j),
                Some(t) => format!("{:?}({})·y^{}·w", t, k, j).to_lowercase(),
            };
            TestFunction {
                label,
                eval,
                sup_norm,
            }
        })
        .collect();
    TestFunctionFamily::new("cylinder-gauss", functions).expect("nonempty family")
}
