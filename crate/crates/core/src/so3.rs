//! Fixed-size linear algebra for the rotation group and small symmetric
//! matrices.
//!
//! Everything here is stack allocated. Symmetric eigenproblems (n ≤ 6) are
//! solved with cyclic Jacobi rotations, which is plenty for the 3×3 inertia
//! and the 6×6 Lyapunov matrices.

use core::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Off-diagonal Frobenius norm (relative to the matrix norm) at which the
/// Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-13;

/// Below this angle [`exp_so3`] switches to the series limits of its
/// coefficients.
pub const RODRIGUES_SMALL_ANGLE: f64 = 1e-8;

/// Smallest eigenvalue accepted by the SPD square roots.
pub const SPD_MIN_EIGENVALUE: f64 = 1e-12;

const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONES: Vec3 = Vec3::new(1.0, 1.0, 1.0);
    pub const E1: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E2: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_fn(mut f: impl FnMut(usize) -> f64) -> Self {
        Self::new(f(0), f(1), f(2))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Maximum norm.
    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn abs(self) -> Vec3 {
        self.map(f64::abs)
    }

    pub fn map(self, mut f: impl FnMut(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn zip(self, o: Vec3, mut f: impl FnMut(f64, f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x, o.x), f(self.y, o.y), f(self.z, o.z))
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        self.zip(o, f64::min)
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        self.zip(o, f64::max)
    }

    /// Componentwise `self ≤ o`.
    pub fn le(self, o: Vec3) -> bool {
        self.x <= o.x && self.y <= o.y && self.z <= o.z
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn outer(self, o: Vec3) -> Mat3 {
        Mat3::from_fn(|i, j| self[i] * o[j])
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Dense `R × C` matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix<const R: usize, const C: usize> {
    pub m: [[f64; C]; R],
}

pub type Mat3 = Matrix<3, 3>;
pub type Mat6 = Matrix<6, 6>;

impl<const R: usize, const C: usize> Default for Matrix<R, C> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const R: usize, const C: usize> Matrix<R, C> {
    pub const fn zeros() -> Self {
        Self { m: [[0.0; C]; R] }
    }

    pub const fn from_rows(m: [[f64; C]; R]) -> Self {
        Self { m }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = [[0.0; C]; R];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        }
        Self { m }
    }

    pub fn transpose(&self) -> Matrix<C, R> {
        Matrix::from_fn(|i, j| self.m[j][i])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(|i, j| self.m[i][j] * s)
    }

    pub fn frobenius(&self) -> f64 {
        self.m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64; C]) -> [f64; R] {
        let mut y = [0.0; R];
        for (yi, row) in y.iter_mut().zip(self.m.iter()) {
            *yi = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
        y
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

impl<const N: usize> Matrix<N, N> {
    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn trace(&self) -> f64 {
        (0..N).map(|i| self.m[i][i]).sum()
    }
}

impl<const R: usize, const C: usize> Index<(usize, usize)> for Matrix<R, C> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.m[i][j]
    }
}

impl<const R: usize, const C: usize> IndexMut<(usize, usize)> for Matrix<R, C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.m[i][j]
    }
}

impl<const R: usize, const C: usize> Add for Matrix<R, C> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.m[i][j] + o.m[i][j])
    }
}

impl<const R: usize, const C: usize> Sub for Matrix<R, C> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.m[i][j] - o.m[i][j])
    }
}

impl<const R: usize, const C: usize> Neg for Matrix<R, C> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const R: usize, const C: usize> Mul<f64> for Matrix<R, C> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

impl<const R: usize, const K: usize, const C: usize> Mul<Matrix<K, C>> for Matrix<R, K> {
    type Output = Matrix<R, C>;
    fn mul(self, o: Matrix<K, C>) -> Matrix<R, C> {
        let mut out = Matrix::<R, C>::zeros();
        for i in 0..R {
            for k in 0..K {
                let a = self.m[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..C {
                    out.m[i][j] += a * o.m[k][j];
                }
            }
        }
        out
    }
}

impl Mat3 {
    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self::from_rows([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn diag(d: Vec3) -> Self {
        Self::from_rows([[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from(self.m[i])
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.m;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = Mat3::from_rows([
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ]);
        Some(adj.scale(1.0 / det))
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::from(self.mul_vec(&v.to_array()))
    }
}

/// The hat map: `hat(v) · w = v × w`.
pub fn hat(v: Vec3) -> Mat3 {
    Mat3::from_rows([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
}

/// Inverse of [`hat`]. Rejects matrices whose skew defect `max |A + Aᵀ|`
/// exceeds 1e-9.
pub fn vee(a: &Mat3) -> Result<Vec3> {
    let asymmetry = (*a + a.transpose()).max_abs();
    if asymmetry > 1e-9 || !a.is_finite() {
        return Err(Error::NotSkew { asymmetry });
    }
    Ok(vee_skew_part(a))
}

/// `vee((A − Aᵀ)/2)`, defined for any matrix.
pub fn vee_skew_part(a: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (a.m[2][1] - a.m[1][2]),
        0.5 * (a.m[0][2] - a.m[2][0]),
        0.5 * (a.m[1][0] - a.m[0][1]),
    )
}

/// Rodrigues' formula for `exp(hat(v))`.
pub fn exp_so3(v: Vec3) -> Rot3 {
    let theta = v.norm();
    let (a, b) = if theta < RODRIGUES_SMALL_ANGLE {
        (1.0, 0.5)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    let k = hat(v);
    Rot3(Mat3::identity() + k.scale(a) + (k * k).scale(b))
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(Mat3);

impl Default for Rot3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Mat3::identity())
    }

    /// Validates `RᵀR = I` and `det R = 1` to 1e-9.
    pub fn new(m: Mat3) -> Result<Self> {
        let orthogonality = orthogonality_defect(&m);
        let det = m.det();
        if !(orthogonality <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(Error::NotRotation { orthogonality, det });
        }
        Ok(Rot3(m))
    }

    /// Wraps `m` without checking. Used for matrices that are orthogonal by
    /// construction up to rounding.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rot3(m)
    }

    /// Polar projection onto SO(3) by the Newton iteration
    /// `R ← (R + R⁻ᵀ)/2`, stopped once the update falls below 1e-12.
    pub fn project(m: &Mat3) -> Result<Self> {
        let mut r = *m;
        for _ in 0..60 {
            let inv_t = r
                .inverse()
                .ok_or(Error::NotRotation { orthogonality: f64::INFINITY, det: r.det() })?
                .transpose();
            let next = (r + inv_t).scale(0.5);
            let delta = (next - r).max_abs();
            r = next;
            if delta < 1e-12 {
                break;
            }
        }
        Rot3::new(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rot3 {
        Rot3(self.0.transpose())
    }

    pub fn col(&self, j: usize) -> Vec3 {
        self.0.col(j)
    }
}

impl Mul for Rot3 {
    type Output = Rot3;
    fn mul(self, o: Rot3) -> Rot3 {
        Rot3(self.0 * o.0)
    }
}

impl Mul<Vec3> for Rot3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        self.0 * v
    }
}

/// `max |RᵀR − I|` entrywise.
pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * *m - Mat3::identity()).max_abs()
}

/// Real symmetric `N × N` matrix. Symmetric by construction: every
/// constructor mirrors or averages the off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat<const N: usize>(Matrix<N, N>);

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// (as columns).
#[derive(Debug, Clone, Copy)]
pub struct SymEigen<const N: usize> {
    pub values: [f64; N],
    pub vectors: Matrix<N, N>,
}

impl<const N: usize> SymMat<N> {
    /// Builds from the upper triangle of `f(i, j)`, `i ≤ j`.
    pub fn from_upper(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::<N, N>::zeros();
        for i in 0..N {
            for j in i..N {
                let v = f(i, j);
                m.m[i][j] = v;
                m.m[j][i] = v;
            }
        }
        SymMat(m)
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrize(a: &Matrix<N, N>) -> Self {
        SymMat(Matrix::from_fn(|i, j| 0.5 * (a.m[i][j] + a.m[j][i])))
    }

    pub fn diagonal(d: [f64; N]) -> Self {
        SymMat(Matrix::from_fn(|i, j| if i == j { d[i] } else { 0.0 }))
    }

    pub fn identity() -> Self {
        SymMat(Matrix::identity())
    }

    pub fn matrix(&self) -> &Matrix<N, N> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.m[i][j]
    }

    pub fn quad_form(&self, x: &[f64; N]) -> f64 {
        let y = self.0.mul_vec(x);
        y.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    /// `Bᵀ A B` for symmetric `B`, re-symmetrized against rounding.
    pub fn congruence(&self, b: &SymMat<N>) -> SymMat<N> {
        SymMat::symmetrize(&(b.0 * self.0 * b.0))
    }

    /// Cyclic Jacobi eigendecomposition.
    pub fn eigen(&self) -> SymEigen<N> {
        let mut a = self.0;
        let mut v = Matrix::<N, N>::identity();
        let scale = a.frobenius();
        if scale > 0.0 && scale.is_finite() {
            for _sweep in 0..100 {
                let mut off = 0.0;
                for p in 0..N {
                    for q in (p + 1)..N {
                        off += a.m[p][q] * a.m[p][q];
                    }
                }
                if (2.0 * off).sqrt() <= JACOBI_TOLERANCE * scale {
                    break;
                }
                for p in 0..N {
                    for q in (p + 1)..N {
                        let apq = a.m[p][q];
                        if apq == 0.0 {
                            continue;
                        }
                        let theta = (a.m[q][q] - a.m[p][p]) / (2.0 * apq);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..N {
                            let akp = a.m[k][p];
                            let akq = a.m[k][q];
                            a.m[k][p] = c * akp - s * akq;
                            a.m[k][q] = s * akp + c * akq;
                        }
                        for k in 0..N {
                            let apk = a.m[p][k];
                            let aqk = a.m[q][k];
                            a.m[p][k] = c * apk - s * aqk;
                            a.m[q][k] = s * apk + c * aqk;
                        }
                        for k in 0..N {
                            let vkp = v.m[k][p];
                            let vkq = v.m[k][q];
                            v.m[k][p] = c * vkp - s * vkq;
                            v.m[k][q] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
        let mut order = [0usize; N];
        for (i, o) in order.iter_mut().enumerate() {
            *o = i;
        }
        order.sort_by(|&i, &j| a.m[i][i].total_cmp(&a.m[j][j]));
        let values = core::array::from_fn(|k| a.m[order[k]][order[k]]);
        let vectors = Matrix::from_fn(|i, k| v.m[i][order[k]]);
        SymEigen { values, vectors }
    }

    /// `(λ_min, λ_max)`.
    pub fn eig_bounds(&self) -> (f64, f64) {
        let e = self.eigen();
        (e.values[0], e.values[N - 1])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig_bounds().0
    }

    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<SymMat<N>> {
        let e = self.eigen();
        let min = e.values[0];
        if !(min > SPD_MIN_EIGENVALUE) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        let mapped: [f64; N] = core::array::from_fn(|k| f(e.values[k]));
        let m = Matrix::from_fn(|i, j| (0..N).map(|k| e.vectors.m[i][k] * mapped[k] * e.vectors.m[j][k]).sum());
        Ok(SymMat::symmetrize(&m))
    }

    /// Unique SPD square root.
    pub fn sqrt(&self) -> Result<SymMat<N>> {
        self.spectral_map(f64::sqrt)
    }

    /// Inverse of the SPD square root.
    pub fn inv_sqrt(&self) -> Result<SymMat<N>> {
        self.spectral_map(|l| 1.0 / l.sqrt())
    }

    pub fn inverse(&self) -> Result<SymMat<N>> {
        self.spectral_map(|l| 1.0 / l)
    }

    /// Errors unless the smallest eigenvalue exceeds [`SPD_MIN_EIGENVALUE`].
    pub fn check_positive_definite(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min > SPD_MIN_EIGENVALUE {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite { min_eigenvalue: min })
        }
    }
}

impl<const N: usize> Add for SymMat<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        SymMat(self.0 + o.0)
    }
}

impl<const N: usize> Sub for SymMat<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        SymMat(self.0 - o.0)
    }
}

impl<const N: usize> Mul<f64> for SymMat<N> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        SymMat(self.0.scale(s))
    }
}

pub fn spd_sqrt<const N: usize>(a: &SymMat<N>) -> Result<SymMat<N>> {
    a.sqrt()
}

pub fn spd_inv_sqrt<const N: usize>(a: &SymMat<N>) -> Result<SymMat<N>> {
    a.inv_sqrt()
}

pub fn sym_eig_bounds<const N: usize>(a: &SymMat<N>) -> (f64, f64) {
    a.eig_bounds()
}

/// Spectral norm `sqrt(λ_max(AᵀA))`.
pub fn induced_norm2<const R: usize, const C: usize>(a: &Matrix<R, C>) -> f64 {
    let ata = SymMat::symmetrize(&(a.transpose() * *a));
    ata.eig_bounds().1.max(0.0).sqrt()
}
