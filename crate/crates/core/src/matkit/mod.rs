//! Dense complex matrices and the handful of decompositions the engines need.
//!
//! Everything here is deterministic: the Hermitian eigensolver is cyclic
//! Jacobi and Haar sampling is driven by an explicit seed.

mod eig;
mod haar;
mod linsolve;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eig::{
    herm_eig, herm_eig_unchecked, polar_unitary, psd_sqrt, svd, top_singular_pair,
    HermEigResult, Svd,
};
pub use haar::{haar_isometry, haar_unitary, gaussian_matrix, random_unit_vector};
pub use linsolve::{cholesky, hpd_inverse, lu_solve_complex, RealLu};
pub(crate) use linsolve::{lower_inverse, min_norm_solve};

pub type C64 = num_complex::Complex64;

/// Largest factor dimension accepted by constructors that validate size.
pub const MAX_FACTOR_DIM: usize = 256;
/// Largest Kronecker product dimension.
pub const MAX_KRON_DIM: usize = 4096;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix in row-major order.
///
/// Serializes as nested rows of `[re, im]` pairs.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct RawMatrix(Vec<Vec<C64>>);

impl TryFrom<RawMatrix> for CMatrix {
    type Error = Error;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        let rows = raw.0.len();
        let cols = raw.0.first().map_or(0, Vec::len);
        if raw.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        CMatrix::new(rows, cols, raw.0.into_iter().flatten().collect())
    }
}

impl From<CMatrix> for RawMatrix {
    fn from(m: CMatrix) -> Self {
        RawMatrix(m.data.chunks(m.cols.max(1)).take(m.rows).map(<[C64]>::to_vec).collect())
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(alloc::format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        let m = CMatrix { rows, cols, data };
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Real matrix from row slices. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| {
            assert_eq!(rows[i].len(), c, "ragged rows");
            C64::new(rows[i][j], 0.0)
        })
    }

    /// Complex matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| {
            assert_eq!(rows[i].len(), c, "ragged rows");
            rows[i][j]
        })
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        m
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Matrix unit `e_{ij}` (zero-indexed) of the given shape.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    /// Column vector.
    pub fn column(v: &[C64]) -> Self {
        CMatrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col_vec(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[C64]) {
        for (r, z) in v.iter().enumerate() {
            self[(r, c)] = *z;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &CMatrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[p * m..(p + 1) * m];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        CMatrix { rows: n, cols: m, data: out }
    }

    /// `self * other^*` without materializing the adjoint.
    pub fn mul_adjoint(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.cols, "mul_adjoint shape mismatch");
        Self::from_fn(self.rows, other.rows, |i, j| {
            self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b.conj()).sum()
        })
    }

    /// `self^* * other` without materializing the adjoint.
    pub fn adjoint_mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows, "adjoint_mul shape mismatch");
        let (n, m) = (self.cols, other.cols);
        let mut out = CMatrix::zeros(n, m);
        for p in 0..self.rows {
            let arow = self.row(p);
            let brow = other.row(p);
            for i in 0..n {
                let a = arow[i].conj();
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * m..(i + 1) * m];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `self^* v`.
    pub fn adjoint_matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, v.len(), "adjoint_matvec shape mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (r, vr) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * vr;
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Re tr(self^* other)`, the real Frobenius inner product.
    pub fn real_inner(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "inner product shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
    }

    /// Frobenius norm of `self - self^*`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// `(self + self^*) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        assert!(self.is_square(), "hermitian_part needs a square matrix");
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn sub_matrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "sub_matrix out of range");
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_sub_matrix(&mut self, r0: usize, c0: usize, m: &CMatrix) {
        assert!(r0 + m.rows <= self.rows && c0 + m.cols <= self.cols, "set_sub_matrix out of range");
        for i in 0..m.rows {
            for j in 0..m.cols {
                self[(r0 + i, c0 + j)] = m[(i, j)];
            }
        }
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(&self, other: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows + other.rows, self.cols + other.cols);
        out.set_sub_matrix(0, 0, self);
        out.set_sub_matrix(self.rows, self.cols, other);
        out
    }

    /// `‖self^* self - I‖`, the unitarity (or isometry) residual.
    pub fn isometry_residual(&self) -> f64 {
        let mut g = self.adjoint_mul(self);
        for i in 0..g.rows {
            g[(i, i)] -= C64::new(1.0, 0.0);
        }
        op_norm_unchecked(&g)
    }

    /// Unitarity residual `max(‖U^*U - I‖, ‖UU^* - I‖)`; infinite for non-square input.
    pub fn unitarity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.isometry_residual().max(self.adjoint().isometry_residual())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn vec_dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn normalize(v: &mut [C64]) -> f64 {
    let n = vec_norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Operator norm (largest singular value).
pub fn op_norm(x: &CMatrix) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(op_norm_unchecked(x))
}

pub(crate) fn op_norm_unchecked(x: &CMatrix) -> f64 {
    if x.rows == 0 || x.cols == 0 {
        return 0.0;
    }
    let scale = x.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    // Gram matrix of the smaller side; rescaled to keep squares in range.
    let xs = x.scale_real(1.0 / scale);
    let gram = if x.rows <= x.cols { xs.mul_adjoint(&xs) } else { xs.adjoint_mul(&xs) };
    let ev = herm_eig_unchecked(&gram).eigenvalues;
    let top = ev.last().copied().unwrap_or(0.0).max(0.0);
    top.sqrt() * scale
}

/// Hermitian PSD test: minimum eigenvalue ≥ `-tol · max(1, ‖x‖)`.
pub fn psd_check(x: &CMatrix, tol: f64) -> Result<bool> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let norm = op_norm_unchecked(x);
    let defect = x.hermitian_defect();
    if defect > 1e-10 * norm.max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    let ev = herm_eig_unchecked(&x.hermitian_part()).eigenvalues;
    let min = ev.first().copied().unwrap_or(0.0);
    let spectral = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(min >= -tol * spectral.max(1.0))
}

/// Kronecker product; entry `(i·p + k, j·q + l)` is `x_{ij} y_{kl}` for `y` of shape `p×q`.
pub fn kron(x: &CMatrix, y: &CMatrix) -> CMatrix {
    let (p, q) = y.shape();
    let mut out = CMatrix::zeros(x.rows * p, x.cols * q);
    let oc = out.cols;
    for i in 0..x.rows {
        for j in 0..x.cols {
            let a = x[(i, j)];
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            for k in 0..p {
                let base = (i * p + k) * oc + j * q;
                for l in 0..q {
                    out.data[base + l] = a * y[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product with the dimension caps enforced.
pub fn kron_checked(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    for m in [x, y] {
        if m.rows > MAX_FACTOR_DIM || m.cols > MAX_FACTOR_DIM {
            return Err(Error::Dimension(alloc::format!("factor {}x{} exceeds {}", m.rows, m.cols, MAX_FACTOR_DIM)));
        }
    }
    if x.rows * y.rows > MAX_KRON_DIM || x.cols * y.cols > MAX_KRON_DIM {
        return Err(Error::Dimension(alloc::format!("Kronecker product exceeds {}", MAX_KRON_DIM)));
    }
    Ok(kron(x, y))
}
