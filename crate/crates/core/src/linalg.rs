//! Small dense linear algebra: row-major matrices, Householder QR, one-sided
//! Jacobi singular values and closed-form 2×2 eigen-decomposition.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{hypot, sqrt};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn apply2(a: &Mat2, v: &Vec2) -> Vec2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Double-double number `hi + lo`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Dd {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Dd::two_sum(s.hi, lo)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = libm::fma(self.hi, o.hi, -p);
        Dd::two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

/// `det(A_n ⋯ A_1)` with the product accumulated in double-double
/// arithmetic, so that the result is not dominated by cancellation when
/// the product is large.
pub fn det_of_product(factors: impl IntoIterator<Item = Mat2>) -> f64 {
    let mut p = [[Dd::from_f64(1.0), Dd::ZERO], [Dd::ZERO, Dd::from_f64(1.0)]];
    for a in factors {
        let mut q = [[Dd::ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                q[i][j] = Dd::from_f64(a[i][0])
                    .mul(p[0][j])
                    .add(Dd::from_f64(a[i][1]).mul(p[1][j]));
            }
        }
        p = q;
    }
    let d = p[0][0].mul(p[1][1]).add(p[0][1].mul(p[1][0]).neg());
    d.hi + d.lo
}

pub fn inverse2(a: &Mat2) -> Result<Mat2> {
    let det = det2(a);
    if det.abs() < 1e-300 {
        bail!(Singular, "2×2 determinant {:e}", det);
    }
    Ok([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}

pub fn norm2(v: &Vec2) -> f64 {
    hypot(v[0], v[1])
}

pub fn normalize2(v: &Vec2) -> Vec2 {
    let n = norm2(v);
    [v[0] / n, v[1] / n]
}

/// Eigen-data of a real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eigen2 {
    /// Real eigenvalues ordered by modulus, `|values[0]| ≤ |values[1]|`, with
    /// unit eigenvectors.
    Real { values: [f64; 2], vectors: [Vec2; 2] },
    /// Complex pair `re ± i·im`.
    Complex { re: f64, im: f64 },
}

/// Eigenvalues from the characteristic polynomial `t² − tr·t + det`.
///
/// `det` is passed separately so that callers holding a long matrix product
/// can supply the (accurate) product of the factor determinants instead of
/// the cancellation-prone `ad − bc` of the product.
pub fn eigen2_with_det(a: &Mat2, det: f64) -> Eigen2 {
    let tr = a[0][0] + a[1][1];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc < 0.0 {
        return Eigen2::Complex {
            re: half,
            im: sqrt(-disc),
        };
    }
    let root = sqrt(disc);
    let big = if half >= 0.0 { half + root } else { half - root };
    let small = if big != 0.0 { det / big } else { 0.0 };
    let vectors = [eigvec2(a, small), eigvec2(a, big)];
    Eigen2::Real {
        values: [small, big],
        vectors,
    }
}

pub fn eigen2(a: &Mat2) -> Eigen2 {
    eigen2_with_det(a, det2(a))
}

/// Unit vector spanning the kernel of `a − λI`, chosen from the better
/// conditioned row.
pub fn eigvec2(a: &Mat2, lambda: f64) -> Vec2 {
    let r0 = [a[0][0] - lambda, a[0][1]];
    let r1 = [a[1][0], a[1][1] - lambda];
    let (n0, n1) = (norm2(&r0), norm2(&r1));
    let v = if n0 >= n1 && n0 > 0.0 {
        [-r0[1], r0[0]]
    } else if n1 > 0.0 {
        [-r1[1], r1[0]]
    } else {
        [1.0, 0.0]
    };
    let v = normalize2(&v);
    // Sign convention: first nonzero component positive.
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            bail!(
                Dimension,
                "{} entries for a {}×{} matrix",
                data.len(),
                rows,
                cols
            );
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                bail!(Dimension, "column {} has length {} ≠ {}", j, c.len(), rows);
            }
            for i in 0..rows {
                m[(i, j)] = c[i];
            }
        }
        Ok(m)
    }

    pub fn from_mat2(a: &Mat2) -> Self {
        Self {
            rows: 2,
            cols: 2,
            data: vec![a[0][0], a[0][1], a[1][0], a[1][1]],
        }
    }

    pub fn to_mat2(&self) -> Option<Mat2> {
        (self.rows == 2 && self.cols == 2).then(|| {
            [
                [self.data[0], self.data[1]],
                [self.data[2], self.data[3]],
            ]
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn frobenius(&self) -> f64 {
        sqrt(self.data.iter().map(|x| x * x).sum::<f64>())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Determinant by partial-pivot elimination.
    pub fn det(&self) -> f64 {
        assert!(self.is_square());
        if let Some(a) = self.to_mat2() {
            return det2(&a);
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].abs().total_cmp(&a[(y, k)].abs()))
                .unwrap_or(k);
            if a[(p, k)] == 0.0 {
                return 0.0;
            }
            if p != k {
                a.swap_rows(p, k);
                det = -det;
            }
            det *= a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        if !self.is_square() {
            bail!(Dimension, "inverse of a {}×{} matrix", self.rows, self.cols);
        }
        if let Some(a) = self.to_mat2() {
            return Ok(Mat::from_mat2(&inverse2(&a)?));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].abs().total_cmp(&a[(y, k)].abs()))
                .unwrap_or(k);
            if a[(p, k)].abs() < 1e-300 {
                bail!(Singular, "pivot {} vanishes", k);
            }
            a.swap_rows(p, k);
            inv.swap_rows(p, k);
            let piv = a[(k, k)];
            for j in 0..n {
                a[(k, j)] /= piv;
                inv[(k, j)] /= piv;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[(i, k)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let (akj, ikj) = (a[(k, j)], inv[(k, j)]);
                    a[(i, j)] -= f * akj;
                    inv[(i, j)] -= f * ikj;
                }
            }
        }
        Ok(inv)
    }

    /// Thin Householder QR of a `d × k` matrix (`k ≤ d`): returns `Q` with
    /// orthonormal columns and upper-triangular `R` (`k × k`) with a
    /// nonnegative diagonal.
    pub fn qr(&self) -> (Mat, Mat) {
        let (m, n) = (self.rows, self.cols);
        assert!(n <= m, "thin QR needs at least as many rows as columns");
        let mut r = self.clone();
        let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
            let alpha = sqrt(v.iter().map(|x| x * x).sum::<f64>());
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * alpha;
            let vnorm = sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if vnorm > 0.0 {
                for x in &mut v {
                    *x /= vnorm;
                }
                for j in k..n {
                    let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
                    for i in k..m {
                        r[(i, j)] -= 2.0 * v[i - k] * dot;
                    }
                }
            }
            reflectors.push(v);
        }
        let mut q = Mat::zeros(m, n);
        for j in 0..n {
            q[(j, j)] = 1.0;
        }
        for k in (0..n).rev() {
            let v = &reflectors[k];
            for j in 0..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * q[(i, j)]).sum();
                for i in k..m {
                    q[(i, j)] -= 2.0 * v[i - k] * dot;
                }
            }
        }
        let mut rr = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                rr[(i, j)] = r[(i, j)];
            }
        }
        for i in 0..n {
            if rr[(i, i)] < 0.0 {
                for j in i..n {
                    rr[(i, j)] = -rr[(i, j)];
                }
                for row in 0..m {
                    q[(row, i)] = -q[(row, i)];
                }
            }
        }
        (q, rr)
    }

    /// Singular values, descending, by one-sided Jacobi rotations on the
    /// columns. Accurate in the relative sense for the small singular values.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut a = if self.cols <= self.rows {
            self.clone()
        } else {
            self.transpose()
        };
        let (m, n) = (a.rows, a.cols);
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                    for i in 0..m {
                        alpha += a[(i, p)] * a[(i, p)];
                        beta += a[(i, q)] * a[(i, q)];
                        gamma += a[(i, p)] * a[(i, q)];
                    }
                    if gamma == 0.0 || gamma.abs() <= 1e-15 * sqrt(alpha * beta) {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / sqrt(1.0 + t * t);
                    let s = c * t;
                    for i in 0..m {
                        let (x, y) = (a[(i, p)], a[(i, q)]);
                        a[(i, p)] = c * x - s * y;
                        a[(i, q)] = s * x + c * y;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = (0..n)
            .map(|j| sqrt((0..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>()))
            .collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        sv
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        if self.cols == 1 {
            return sqrt(self.data.iter().map(|x| x * x).sum::<f64>());
        }
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// Smallest singular value of a tall matrix (the co-norm of the map).
    pub fn co_norm(&self) -> f64 {
        if self.cols == 1 {
            return self.op_norm();
        }
        let k = self.rows.min(self.cols);
        self.singular_values().get(k - 1).copied().unwrap_or(0.0)
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Orthonormalizes the columns of a tall matrix.
pub fn orthonormalize(m: &Mat) -> Mat {
    m.qr().0
}

/// Principal angles between two subspaces given by orthonormal bases: the
/// returned value is `sin` of the largest principal angle.
pub fn subspace_distance(a: &Mat, b: &Mat) -> f64 {
    // ‖(I − B Bᵀ) A‖ for orthonormal A and B.
    let proj = b.mul(&b.transpose().mul(a));
    let mut resid = a.clone();
    for i in 0..resid.rows {
        for j in 0..resid.cols {
            resid[(i, j)] -= proj[(i, j)];
        }
    }
    resid.op_norm()
}
