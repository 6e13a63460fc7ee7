//! Finite-time analysis of the derivative cocycle along orbit segments.
//!
//! For a splitting `E ⊕ F` and `n ≥ 0`:
//!
//! ```text
//! ψ_n(x) = log ‖df^n|E_x‖                 (bundle E)
//! φ_n(x) = log ‖(df^n|F_x)^{-1}‖          (bundle F)
//! ```
//!
//! Norms of a restriction are the extreme singular values of the product
//! applied to an orthonormal basis of the bundle. Long products are
//! re-orthonormalized by QR every [`QR_INTERVAL`] steps and carried in log
//! scale, so `λⁿ` never overflows.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::linalg::{
    eigen2_with_det, inverse2, mul2, normalize2, orthonormalize, subspace_distance, Eigen2, Mat,
    Mat2, IDENTITY2,
};
use crate::math::{exp, ln};
use crate::pliss::{ultimate_pliss_times, PeriodicSequence, RealSequence};
use crate::sum::{sum, CompensatedSum};

/// Steps between QR re-orthonormalizations of a running product.
pub const QR_INTERVAL: usize = 16;
/// Jacobians with `|det| <` this are rejected.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;
/// Default tolerance for the equivariance residual of a frame.
pub const FRAME_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bundle {
    E,
    F,
}

/// Orbit points with the derivative at each point.
///
/// Periodic segments store one period: `π` Jacobians and `π` (or `π + 1`)
/// points; all indices wrap modulo `π`. Non-periodic segments store
/// `x_0, …, x_n` and `J_0, …, J_{n−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrbitJson", into = "OrbitJson")]
pub struct OrbitSegment {
    dim: usize,
    points: Vec<Vec<f64>>,
    jacobians: Vec<Mat>,
    period: Option<usize>,
}

impl OrbitSegment {
    pub fn new(points: Vec<Vec<f64>>, jacobians: Vec<Mat>, period: Option<usize>) -> Result<Self> {
        let Some(first) = jacobians.first() else {
            return Err(Error::Empty("orbit segment has no Jacobians".into()));
        };
        let dim = first.rows();
        for (i, j) in jacobians.iter().enumerate() {
            if j.rows() != dim || j.cols() != dim {
                bail!(Dimension, "Jacobian {} is {}×{}, expected {}×{}", i, j.rows(), j.cols(), dim, dim);
            }
            let det = j.det();
            if !(det.abs() >= SINGULAR_THRESHOLD) {
                bail!(Singular, "Jacobian {} has |det| = {:e} below {:e}", i, det.abs(), SINGULAR_THRESHOLD);
            }
        }
        if let Some(p) = points.iter().position(|p| p.len() != dim) {
            bail!(Dimension, "point {} has {} coordinates, expected {}", p, points[p].len(), dim);
        }
        let n = jacobians.len();
        match period {
            Some(pi) => {
                if pi != n {
                    bail!(Parameter, "period {} but {} Jacobians", pi, n);
                }
                if points.len() != n && points.len() != n + 1 {
                    bail!(Parameter, "periodic segment needs {} or {} points, got {}", n, n + 1, points.len());
                }
            }
            None => {
                if points.len() != n + 1 {
                    bail!(Parameter, "segment needs {} points, got {}", n + 1, points.len());
                }
            }
        }
        Ok(Self {
            dim,
            points,
            jacobians,
            period,
        })
    }

    /// Planar orbit from 2×2 Jacobians.
    pub fn planar(points: Vec<[f64; 2]>, jacobians: Vec<Mat2>, period: Option<usize>) -> Result<Self> {
        Self::new(
            points.into_iter().map(|p| p.to_vec()).collect(),
            jacobians.iter().map(Mat::from_mat2).collect(),
            period,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    /// Number of stored Jacobians (one period for periodic segments).
    pub fn len(&self) -> usize {
        self.jacobians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jacobians.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn jacobians(&self) -> &[Mat] {
        &self.jacobians
    }

    /// Resolves a (possibly negative or wrapping) index.
    pub fn index(&self, i: i64) -> Result<usize> {
        match self.period {
            Some(p) => Ok(i.rem_euclid(p as i64) as usize),
            None => {
                if i < 0 || i as usize > self.jacobians.len() {
                    bail!(Range, "index {} outside 0..={}", i, self.jacobians.len());
                }
                Ok(i as usize)
            }
        }
    }

    pub fn point(&self, i: i64) -> Result<&[f64]> {
        Ok(&self.points[self.index(i)?])
    }

    pub fn jacobian(&self, i: i64) -> Result<&Mat> {
        let k = self.index(i)?;
        if k == self.jacobians.len() {
            bail!(Range, "no Jacobian at the last point {}", i);
        }
        Ok(&self.jacobians[k])
    }

    fn check_block(&self, base: i64, n: usize) -> Result<()> {
        if self.period.is_none() && (base < 0 || base as usize + n > self.jacobians.len()) {
            bail!(
                Range,
                "block [{}, {}) exceeds the segment of length {}",
                base,
                base + n as i64,
                self.jacobians.len()
            );
        }
        Ok(())
    }
}

/// Serialized form: points, Jacobians as row lists, optional period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitJson {
    pub points: Vec<Vec<f64>>,
    pub jacobians: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
}

impl TryFrom<OrbitJson> for OrbitSegment {
    type Error = Error;
    fn try_from(raw: OrbitJson) -> Result<Self> {
        let jacobians = raw
            .jacobians
            .into_iter()
            .map(|rows| {
                let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
                if rows.iter().any(|row| row.len() != c) {
                    bail!(Dimension, "ragged Jacobian rows");
                }
                Mat::from_row_major(r, c, rows.concat())
            })
            .collect::<Result<_>>()?;
        Self::new(raw.points, jacobians, raw.period)
    }
}

impl From<OrbitSegment> for OrbitJson {
    fn from(o: OrbitSegment) -> Self {
        let jacobians = o
            .jacobians
            .iter()
            .map(|j| j.data().chunks(j.cols()).map(<[f64]>::to_vec).collect())
            .collect();
        Self {
            points: o.points,
            jacobians,
            period: o.period,
        }
    }
}

/// Matrix of `df_{x_i}: E_i → E_{i+1}` (or `F`) in the frame's bases.
fn restricted_step(orbit: &OrbitSegment, frame: &SplittingFrame, bundle: Bundle, i: i64) -> Result<Mat> {
    let j = orbit.jacobian(i)?;
    let here = frame.basis(bundle, orbit.index(i)?);
    let next = frame.basis(bundle, orbit.index(i + 1)?);
    Ok(next.transpose().mul(&j.mul(here)))
}

/// `(log σ_max, log σ_min)` of `df^n_{x_base}` restricted to the bundle.
///
/// The product is taken of the restricted steps, so components leaking out
/// of the bundle (the instability of forward iteration on `E`) never enter.
fn log_singular_extremes(
    orbit: &OrbitSegment,
    frame: &SplittingFrame,
    bundle: Bundle,
    base: i64,
    n: usize,
) -> Result<(f64, f64)> {
    orbit.check_block(base, n)?;
    let k = frame.basis(bundle, 0).cols();
    if k == 1 {
        let mut s = CompensatedSum::new();
        for t in 0..n {
            s.add(ln(restricted_step(orbit, frame, bundle, base + t as i64)?[(0, 0)].abs()));
        }
        return Ok((s.value(), s.value()));
    }
    let mut q = Mat::identity(k);
    let mut r = Mat::identity(k);
    let mut log_scale = 0.0;
    let mut log_det = CompensatedSum::new();
    for t in 0..n {
        let a = restricted_step(orbit, frame, bundle, base + t as i64)?;
        log_det.add(ln(a.det().abs()));
        q = a.mul(&q);
        if (t + 1) % QR_INTERVAL == 0 || t + 1 == n {
            let (qq, rr) = q.qr();
            q = qq;
            r = rr.mul(&r);
            let s = r.max_abs();
            if s > 0.0 {
                r.scale(1.0 / s);
                log_scale += ln(s);
            }
        }
    }
    let sv = r.singular_values();
    let smax = log_scale + ln(sv[0]);
    let smin = if k == 2 {
        // σ_max·σ_min = |det|, free of cancellation.
        log_det.value() - smax
    } else {
        log_scale + ln(*sv.last().expect("nonempty"))
    };
    Ok((smax, smin))
}

/// Per-point orthonormal bases of `E` (`d × d_E`) and `F` (`d × d_F`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingFrame {
    e: Vec<Mat>,
    f: Vec<Mat>,
}

impl SplittingFrame {
    pub fn new(e: Vec<Mat>, f: Vec<Mat>) -> Result<Self> {
        if e.is_empty() || e.len() != f.len() {
            bail!(Dimension, "frame has {} E bases and {} F bases", e.len(), f.len());
        }
        let d = e[0].rows();
        for (be, bf) in e.iter().zip(&f) {
            if be.rows() != d || bf.rows() != d || be.cols() + bf.cols() != d {
                bail!(Dimension, "E and F bases must span complementary dimensions of {}", d);
            }
        }
        Ok(Self { e, f })
    }

    /// The same bases at every one of `len` points.
    pub fn constant(len: usize, e: &[Vec<f64>], f: &[Vec<f64>]) -> Result<Self> {
        let be = orthonormalize(&Mat::from_columns(e)?);
        let bf = orthonormalize(&Mat::from_columns(f)?);
        Self::new(vec![be; len], vec![bf; len])
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn dim_e(&self) -> usize {
        self.e[0].cols()
    }

    pub fn dim_f(&self) -> usize {
        self.f[0].cols()
    }

    pub fn basis(&self, bundle: Bundle, i: usize) -> &Mat {
        match bundle {
            Bundle::E => &self.e[i],
            Bundle::F => &self.f[i],
        }
    }

    /// Largest `sin∠(df(E_x), E_{f(x)})` and the same for `F`.
    pub fn equivariance_residual(&self, orbit: &OrbitSegment) -> Result<(f64, f64)> {
        self.check(orbit)?;
        let mut worst = (0.0f64, 0.0f64);
        for i in 0..orbit.len() {
            let next = orbit.index(i as i64 + 1)?;
            if next >= self.len() {
                break;
            }
            let j = orbit.jacobian(i as i64)?;
            let ie = orthonormalize(&j.mul(&self.e[i]));
            let i_f = orthonormalize(&j.mul(&self.f[i]));
            worst.0 = worst.0.max(subspace_distance(&ie, &self.e[next]));
            worst.1 = worst.1.max(subspace_distance(&i_f, &self.f[next]));
        }
        Ok(worst)
    }

    fn check(&self, orbit: &OrbitSegment) -> Result<()> {
        let need = match orbit.period() {
            Some(p) => p,
            None => orbit.len() + 1,
        };
        if self.len() < need {
            bail!(Dimension, "frame has {} points, orbit needs {}", self.len(), need);
        }
        if self.e[0].rows() != orbit.dim() {
            bail!(Dimension, "frame dimension {} ≠ orbit dimension {}", self.e[0].rows(), orbit.dim());
        }
        Ok(())
    }
}

/// `ψ_n(x_base)` for `E`, `φ_n(x_base)` for `F`.
pub fn bundle_log_norm(
    orbit: &OrbitSegment,
    frame: &SplittingFrame,
    bundle: Bundle,
    n: usize,
    base: i64,
) -> Result<f64> {
    frame.check(orbit)?;
    orbit.index(base)?;
    if n == 0 {
        orbit.check_block(base, 0)?;
        return Ok(0.0);
    }
    let (smax, smin) = log_singular_extremes(orbit, frame, bundle, base, n)?;
    Ok(match bundle {
        Bundle::E => smax,
        Bundle::F => -smin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentMethod {
    /// Eigenvalues of the one-period product.
    Eigenvalues,
    /// Complex pair: both exponents are `log|det|/(2π)`.
    ComplexPair,
    /// Product not diagonalizable within tolerance: singular values used.
    SingularValueFallback,
    /// Log-accumulated QR over repeated periods (`d > 2`).
    Qr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    /// Ascending.
    pub exponents: Vec<f64>,
    pub method: ExponentMethod,
    pub warning: Option<String>,
}

/// Periods of repetition for the QR estimate when `d > 2`.
const QR_EXPONENT_STEPS: usize = 4096;

/// Lyapunov exponents `(1/π)·log|μ_i|` of a periodic orbit.
pub fn periodic_exponents(orbit: &OrbitSegment) -> Result<ExponentReport> {
    let Some(pi) = orbit.period() else {
        bail!(Precondition, "periodic_exponents needs a periodic orbit");
    };
    if orbit.dim() == 2 {
        return planar_exponents(orbit, pi);
    }
    // d > 2: average of log R_jj over enough periods.
    let d = orbit.dim();
    let reps = QR_EXPONENT_STEPS.div_ceil(pi).max(1);
    let mut q = Mat::identity(d);
    let mut acc: Vec<CompensatedSum> = (0..d).map(|_| CompensatedSum::new()).collect();
    for t in 0..reps * pi {
        q = orbit.jacobian(t as i64)?.mul(&q);
        let (qq, r) = q.qr();
        for (j, a) in acc.iter_mut().enumerate() {
            a.add(ln(r[(j, j)]));
        }
        q = qq;
    }
    let total = (reps * pi) as f64;
    let mut exponents: Vec<f64> = acc.iter().map(|a| a.value() / total).collect();
    exponents.sort_by(f64::total_cmp);
    Ok(ExponentReport {
        exponents,
        method: ExponentMethod::Qr,
        warning: None,
    })
}

/// Product of one period at `x_0`, normalized step by step, as
/// `(P / e^s, s, log|det P|, sign det P)`.
fn normalized_return(orbit: &OrbitSegment, pi: usize) -> Result<(Mat2, f64, f64, f64)> {
    let mut p = IDENTITY2;
    let mut s = CompensatedSum::new();
    let mut log_det = CompensatedSum::new();
    let mut sign = 1.0;
    for i in 0..pi {
        let j = orbit.jacobian(i as i64)?.to_mat2().expect("planar");
        let det = crate::linalg::det2(&j);
        log_det.add(ln(det.abs()));
        sign *= det.signum();
        p = mul2(&j, &p);
        let m = p.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        p = p.map(|r| r.map(|x| x / m));
        s.add(ln(m));
    }
    Ok((p, s.value(), log_det.value(), sign))
}

fn planar_exponents(orbit: &OrbitSegment, pi: usize) -> Result<ExponentReport> {
    let (p, s, log_det, sign) = normalized_return(orbit, pi)?;
    let pif = pi as f64;
    let det_scaled = sign * exp(log_det - 2.0 * s);
    match eigen2_with_det(&p, det_scaled) {
        Eigen2::Complex { .. } => Ok(ExponentReport {
            exponents: vec![log_det / (2.0 * pif); 2],
            method: ExponentMethod::ComplexPair,
            warning: None,
        }),
        Eigen2::Real { values, .. } => {
            let tr = p[0][0] + p[1][1];
            let disc = 0.25 * tr * tr - det_scaled;
            let scalar = (p[0][1].abs() + p[1][0].abs()) <= 1e-14 * tr.abs().max(1e-300)
                && (p[0][0] - p[1][1]).abs() <= 1e-14 * tr.abs().max(1e-300);
            if disc.abs() <= 1e-12 * (0.25 * tr * tr) && !scalar {
                // Repeated eigenvalue with a Jordan block.
                let m = Mat::from_mat2(&p);
                let sv = m.singular_values();
                let hi = s + ln(sv[0]);
                let lo = log_det - hi;
                return Ok(ExponentReport {
                    exponents: vec![lo / pif, hi / pif],
                    method: ExponentMethod::SingularValueFallback,
                    warning: Some("one-period product is defective; singular values used".into()),
                });
            }
            let big = s + ln(values[1].abs());
            let small = log_det - big;
            let mut e = vec![small / pif, big / pif];
            e.sort_by(f64::total_cmp);
            Ok(ExponentReport {
                exponents: e,
                method: ExponentMethod::Eigenvalues,
                warning: None,
            })
        }
    }
}

/// `(1/n)·log σ_i(df^n_{x_0})` over the whole segment, ascending.
///
/// For planar orbits the smaller value comes from `Σ log|det J_i|`, so it
/// does not lose precision when the product is nearly rank one.
pub fn finite_time_exponents(orbit: &OrbitSegment) -> Result<Vec<f64>> {
    let n = orbit.len();
    let d = orbit.dim();
    let mut q = Mat::identity(d);
    let mut r = Mat::identity(d);
    let mut log_scale = 0.0;
    let mut log_det = CompensatedSum::new();
    for t in 0..n {
        let j = &orbit.jacobians[t];
        log_det.add(ln(j.det().abs()));
        q = j.mul(&q);
        if (t + 1) % QR_INTERVAL == 0 || t + 1 == n {
            let (qq, rr) = q.qr();
            q = qq;
            r = rr.mul(&r);
            let s = r.max_abs();
            r.scale(1.0 / s);
            log_scale += ln(s);
        }
    }
    let sv = r.singular_values();
    let mut out: Vec<f64> = sv.iter().map(|s| (log_scale + ln(*s)) / n as f64).collect();
    if d == 2 {
        out[1] = log_det.value() / n as f64 - out[0];
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// A weighted orbit in an ensemble.
#[derive(Debug, Clone, Copy)]
pub struct WeightedOrbit<'a> {
    pub weight: f64,
    pub orbit: &'a OrbitSegment,
    pub frame: &'a SplittingFrame,
}

/// `Σ_w w · mean_x (1/n)·ψ_n(x)` (or `φ_n` for `F`), the mean taken over the
/// orbit measure: all points of a period, or all bases with a full block on a
/// finite segment.
pub fn subadditive_average(ensemble: &[WeightedOrbit<'_>], n: usize, bundle: Bundle) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble has no orbits".into()));
    }
    if n == 0 {
        bail!(Parameter, "n must be ≥ 1");
    }
    let total = sum(ensemble.iter().map(|w| w.weight));
    let mut acc = CompensatedSum::new();
    for member in ensemble {
        let bases = match member.orbit.period() {
            Some(p) => p,
            None => {
                if member.orbit.len() < n {
                    bail!(Range, "segment of length {} shorter than n = {}", member.orbit.len(), n);
                }
                member.orbit.len() - n + 1
            }
        };
        let mut inner = CompensatedSum::new();
        for b in 0..bases {
            inner.add(bundle_log_norm(member.orbit, member.frame, bundle, n, b as i64)?);
        }
        acc.add(member.weight * inner.value() / (bases as f64 * n as f64));
    }
    Ok(acc.value() / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CValue {
    /// `sup_k e^{kNλ}·∏_{ℓ<k} ‖df^N‖`, at least 1.
    pub value: f64,
    pub log_value: f64,
    /// Maximizing `k`.
    pub argmax: usize,
    /// Set on finite segments when the maximum sits at the last available
    /// `k`: the value is then only a lower bound.
    pub diverging: bool,
}

/// Log of the `ℓ`-th factor of the C-function product at `base`.
fn c_factor(
    orbit: &OrbitSegment,
    frame: &SplittingFrame,
    n: usize,
    bundle: Bundle,
    base: i64,
    l: usize,
) -> Result<f64> {
    let step = n as i64;
    match bundle {
        Bundle::E => bundle_log_norm(orbit, frame, Bundle::E, n, base + l as i64 * step),
        // ‖df^{−N}|F at f^{−ℓN}x‖ = ‖(df^N|F at f^{−(ℓ+1)N}x)^{-1}‖.
        Bundle::F => bundle_log_norm(orbit, frame, Bundle::F, n, base - (l as i64 + 1) * step),
    }
}

/// `C^{E,N}_{−λ}(x_base)` (forward blocks) or `C^{F,N}_{−λ}(x_base)`
/// (backward blocks).
///
/// On a periodic orbit the supremum is attained for `k ≤ π`, provided the
/// one-period product is below `e^{−πNλ}`; otherwise the supremum is
/// infinite and [`Error::NotContracting`] is returned.
pub fn c_function(
    orbit: &OrbitSegment,
    frame: &SplittingFrame,
    n: usize,
    lambda: f64,
    bundle: Bundle,
    base: i64,
) -> Result<CValue> {
    if n == 0 {
        bail!(Parameter, "N must be ≥ 1");
    }
    frame.check(orbit)?;
    let kmax = match orbit.period() {
        Some(p) => p,
        None => {
            let b = orbit.index(base)?;
            match bundle {
                Bundle::E => (orbit.len() - b) / n,
                Bundle::F => b / n,
            }
        }
    };
    let nl = n as f64 * lambda;
    let mut log_prod = CompensatedSum::new();
    let mut best = (0.0f64, 0usize);
    for k in 1..=kmax {
        log_prod.add(c_factor(orbit, frame, n, bundle, base, k - 1)?);
        let term = k as f64 * nl + log_prod.value();
        if term > best.0 {
            best = (term, k);
        }
    }
    let diverging = match orbit.period() {
        Some(p) => {
            // log of the one-period product against −πNλ.
            let one_period = log_prod.value();
            if one_period >= -(p as f64) * nl {
                return Err(Error::NotContracting {
                    product: exp(one_period),
                    bound: exp(-(p as f64) * nl),
                });
            }
            false
        }
        None => kmax > 0 && best.1 == kmax,
    };
    Ok(CValue {
        value: exp(best.0),
        log_value: best.0,
        argmax: best.1,
        diverging,
    })
}

/// `L* = δ / C`.
pub fn manifold_size(c_value: f64, delta: f64) -> Result<f64> {
    if !(c_value >= 1.0) {
        bail!(Precondition, "C-value {} must be ≥ 1", c_value);
    }
    if !(delta > 0.0) {
        bail!(Precondition, "δ = {} must be positive", delta);
    }
    Ok(delta / c_value)
}

/// Sample points of an orbit: one period, or every base with a full block.
fn sample_bases(orbit: &OrbitSegment, n: usize) -> usize {
    match orbit.period() {
        Some(p) => p,
        None => (orbit.len() + 1).saturating_sub(n),
    }
}

/// Rounding allowance in the log-scale ½-inequality.
const DOMINATION_SLACK: f64 = 1e-12;

/// Smallest `N ≤ N_max` with `‖df^N|E‖ ≤ ½·m(df^N|F)` at every sampled
/// point (`m` the co-norm).
pub fn domination_check(orbit: &OrbitSegment, frame: &SplittingFrame, n_max: usize) -> Result<Option<usize>> {
    if n_max == 0 {
        bail!(Parameter, "N_max must be ≥ 1");
    }
    frame.check(orbit)?;
    let half = ln(0.5);
    'outer: for n in 1..=n_max {
        let bases = sample_bases(orbit, n);
        if bases == 0 {
            break;
        }
        for b in 0..bases {
            let e = bundle_log_norm(orbit, frame, Bundle::E, n, b as i64)?;
            let f_conorm = -bundle_log_norm(orbit, frame, Bundle::F, n, b as i64)?;
            if e > half + f_conorm + DOMINATION_SLACK {
                continue 'outer;
            }
        }
        return Ok(Some(n));
    }
    Ok(None)
}

/// Whether the ½-inequality holds for `N` at every sampled point.
pub fn dominated_at(orbit: &OrbitSegment, frame: &SplittingFrame, n: usize) -> Result<bool> {
    let half = ln(0.5);
    for b in 0..sample_bases(orbit, n) {
        let e = bundle_log_norm(orbit, frame, Bundle::E, n, b as i64)?;
        let f_conorm = -bundle_log_norm(orbit, frame, Bundle::F, n, b as i64)?;
        if e > half + f_conorm + DOMINATION_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `χ`, `γ ∈ (0, χ)`, block length `N` and `C_f ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityEstimate {
    pub chi: f64,
    pub gamma: f64,
    pub n: usize,
    pub cf: f64,
}

impl HyperbolicityEstimate {
    pub fn new(chi: f64, gamma: f64, n: usize, cf: f64) -> Result<Self> {
        if !(chi > 0.0) {
            bail!(Parameter, "χ = {} must be positive", chi);
        }
        if !(gamma > 0.0 && gamma < chi) {
            bail!(Parameter, "γ = {} must lie in (0, χ = {})", gamma, chi);
        }
        if n == 0 {
            bail!(Parameter, "N must be ≥ 1");
        }
        if !(cf >= 1.0) {
            bail!(Parameter, "C_f = {} must be ≥ 1", cf);
        }
        Ok(Self { chi, gamma, n, cf })
    }

    /// `c2 = N(χ − γ)`.
    pub fn c2(&self) -> f64 {
        self.n as f64 * (self.chi - self.gamma)
    }

    /// `A = N·C_f`.
    pub fn bound(&self) -> f64 {
        self.n as f64 * self.cf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicTimes {
    /// `a_i = −log‖df^N|E at f^{−iN}(p)‖`, `i = 1, …, π`.
    pub sequence: Vec<f64>,
    /// `A = N·C_f`.
    pub bound: f64,
    /// Ultimate Pliss times `m ∈ {1, …, π}` of `(a_i)`.
    pub indices: Vec<usize>,
    /// Orbit index of `f^{−mN}(p)` for each returned `m`.
    pub orbit_indices: Vec<usize>,
}

/// Hyperbolic times of a periodic orbit: the ultimate `c1`-Pliss times `m`
/// of `a_i = −log‖df^N|E_{f^{−iN}(p)}‖`. At `y = f^{−mN}(p)` every
/// `∏_{ℓ<k} ‖df^N|E_{f^{ℓN}(y)}‖ ≤ e^{−k·c1}`.
pub fn hyperbolic_times(
    orbit: &OrbitSegment,
    frame: &SplittingFrame,
    est: &HyperbolicityEstimate,
    c1: f64,
) -> Result<HyperbolicTimes> {
    let Some(pi) = orbit.period() else {
        bail!(Precondition, "hyperbolic_times needs a periodic orbit");
    };
    let n = est.n as i64;
    let sequence: Vec<f64> = (1..=pi as i64)
        .map(|i| bundle_log_norm(orbit, frame, Bundle::E, est.n, -i * n).map(|x| -x))
        .collect::<Result<_>>()?;
    let bound = est.bound();
    let seq = RealSequence::with_bound(sequence.clone(), bound)?;
    let indices = ultimate_pliss_times(&PeriodicSequence::new(seq), &c1);
    let orbit_indices = indices
        .iter()
        .map(|&m| orbit.index(-(m as i64) * n))
        .collect::<Result<_>>()?;
    Ok(HyperbolicTimes {
        sequence,
        bound,
        indices,
        orbit_indices,
    })
}

/// Fraction of `ℓ ∈ {0, …, π−1}` with `f^{ℓN}(x_0)` in the region.
pub fn occupation_frequency(orbit: &OrbitSegment, n: usize, region: impl Fn(&[f64]) -> bool) -> Result<f64> {
    let Some(pi) = orbit.period() else {
        bail!(Precondition, "occupation_frequency needs a periodic orbit");
    };
    let mut hits = 0usize;
    for l in 0..pi {
        if region(orbit.point((l * n) as i64)?) {
            hits += 1;
        }
    }
    Ok(hits as f64 / pi as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfReport {
    /// `max_x max{log‖df_x‖, log‖df_x^{-1}‖}`.
    pub raw: f64,
    /// `max(raw, 1 + 1e−9)`.
    pub value: f64,
}

pub fn cf_constant(orbit: &OrbitSegment) -> CfReport {
    let raw = orbit
        .jacobians()
        .iter()
        .map(|j| {
            let sv = j.singular_values();
            ln(sv[0]).max(-ln(*sv.last().expect("nonempty")))
        })
        .fold(0.0f64, f64::max);
    CfReport {
        raw,
        value: raw.max(1.0 + 1e-9),
    }
}

/// Oseledets frame of a periodic planar orbit with `d_E = d_F = 1`:
/// eigenvectors of the return product at `x_0`; `F` is transported forward
/// and `E` backward (each direction is the stable one for its transport).
pub fn periodic_frame(orbit: &OrbitSegment) -> Result<SplittingFrame> {
    let Some(pi) = orbit.period() else {
        bail!(Precondition, "periodic_frame needs a periodic orbit");
    };
    if orbit.dim() != 2 {
        return subspace_frame_periodic(orbit, 1);
    }
    let (p, s, log_det, sign) = normalized_return(orbit, pi)?;
    let Eigen2::Real { vectors, values } = eigen2_with_det(&p, sign * exp(log_det - 2.0 * s)) else {
        bail!(Precondition, "return product has complex eigenvalues: no real splitting");
    };
    if values[0].abs() == values[1].abs() {
        bail!(Precondition, "return product has equal moduli: no splitting");
    }
    let mut f = vec![vectors[1]; pi];
    for i in 0..pi - 1 {
        let j = orbit.jacobian(i as i64)?.to_mat2().expect("planar");
        f[i + 1] = normalize2(&crate::linalg::apply2(&j, &f[i]));
    }
    let mut e = vec![vectors[0]; pi];
    let mut v = vectors[0];
    for i in (1..pi).rev() {
        let jinv = inverse2(&orbit.jacobian(i as i64)?.to_mat2().expect("planar"))?;
        v = normalize2(&crate::linalg::apply2(&jinv, &v));
        e[i] = v;
    }
    let col = |v: [f64; 2]| Mat::from_columns(&[v.to_vec()]).expect("column");
    SplittingFrame::new(e.into_iter().map(col).collect(), f.into_iter().map(col).collect())
}

/// Warm-up steps of subspace iteration.
pub const FRAME_WARMUP: usize = 200;

fn generic_basis(d: usize, k: usize) -> Mat {
    // Fixed, well-spread columns avoiding coordinate-aligned starts.
    let mut cols = Vec::with_capacity(k);
    for j in 0..k {
        cols.push(
            (0..d)
                .map(|i| 1.0 + libm::sin(1.7 * (i as f64 + 1.0) * (j as f64 + 1.3)))
                .collect::<Vec<f64>>(),
        );
    }
    orthonormalize(&Mat::from_columns(&cols).expect("columns"))
}

fn subspace_frame_periodic(orbit: &OrbitSegment, d_e: usize) -> Result<SplittingFrame> {
    let pi = orbit.period().expect("periodic");
    let d = orbit.dim();
    let d_f = d - d_e;
    let loops = FRAME_WARMUP.div_ceil(pi).max(1);
    let mut qf = generic_basis(d, d_f);
    for t in 0..loops * pi {
        qf = orthonormalize(&orbit.jacobian(t as i64)?.mul(&qf));
    }
    let mut f = Vec::with_capacity(pi);
    for t in 0..pi {
        f.push(qf.clone());
        qf = orthonormalize(&orbit.jacobian(t as i64)?.mul(&qf));
    }
    let inverses: Vec<Mat> = orbit.jacobians().iter().map(Mat::inverse).collect::<Result<_>>()?;
    let mut qe = generic_basis(d, d_e);
    for t in (0..loops * pi).rev() {
        qe = orthonormalize(&inverses[t % pi].mul(&qe));
    }
    let mut e = vec![qe.clone(); pi];
    for t in (1..pi).rev() {
        qe = orthonormalize(&inverses[t].mul(&qe));
        e[t] = qe.clone();
    }
    e[0] = orthonormalize(&inverses[0].mul(&e[1 % pi]));
    SplittingFrame::new(e, f)
}

/// Frame of a finite segment from forward (for `F`) and backward (for `E`)
/// subspace iteration. The first and last `warmup` points are only used to
/// converge, so the result is the trimmed segment
/// `x_warmup, …, x_{n−warmup}` with its frame.
pub fn power_iteration_frame(
    orbit: &OrbitSegment,
    d_e: usize,
    warmup: usize,
) -> Result<(OrbitSegment, SplittingFrame)> {
    if orbit.is_periodic() {
        let frame = if orbit.dim() == 2 && d_e == 1 {
            periodic_frame(orbit)?
        } else {
            subspace_frame_periodic(orbit, d_e)?
        };
        return Ok((orbit.clone(), frame));
    }
    let d = orbit.dim();
    if d_e == 0 || d_e >= d {
        bail!(Parameter, "d_E = {} must lie in 1..{}", d_e, d);
    }
    let n = orbit.len();
    if n < 2 * warmup + 1 {
        bail!(Range, "segment of length {} too short for warm-up {}", n, warmup);
    }
    let mut f_all = Vec::with_capacity(n + 1);
    let mut qf = generic_basis(d, d - d_e);
    f_all.push(qf.clone());
    for t in 0..n {
        qf = orthonormalize(&orbit.jacobians[t].mul(&qf));
        f_all.push(qf.clone());
    }
    let mut e_all = vec![Mat::zeros(d, d_e); n + 1];
    let mut qe = generic_basis(d, d_e);
    e_all[n] = qe.clone();
    for t in (0..n).rev() {
        qe = orthonormalize(&orbit.jacobians[t].inverse()?.mul(&qe));
        e_all[t] = qe.clone();
    }
    let (lo, hi) = (warmup, n - warmup);
    let trimmed = OrbitSegment::new(
        orbit.points[lo..=hi].to_vec(),
        orbit.jacobians[lo..hi].to_vec(),
        None,
    )?;
    let frame = SplittingFrame::new(e_all[lo..=hi].to_vec(), f_all[lo..=hi].to_vec())?;
    Ok((trimmed, frame))
}

/// Human-readable description of a C-value for reports.
pub fn describe_c_value(c: &CValue) -> String {
    if c.diverging {
        format!("{:.6e} (lower bound: maximum at last available k = {})", c.value, c.argmax)
    } else {
        format!("{:.6e} (attained at k = {})", c.value, c.argmax)
    }
}
