use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// LU factorization with partial pivoting of a dense real matrix.
#[derive(Debug, Clone)]
pub struct RealLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl RealLu {
    /// Factors the row-major `n×n` matrix `a`; `None` when a pivot vanishes.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        let (mut min_pivot, mut max_pivot) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let (mut p, mut best) = (k, a[k * n + k].abs());
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            let d = a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] / d;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Some(RealLu { n, lu: a, piv, min_pivot, max_pivot })
    }

    /// Ratio of extreme pivots; a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        if self.n == 0 {
            1.0
        } else {
            self.max_pivot / self.min_pivot
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Cholesky factor `L` (lower triangular) with `x = L L^*`; `None` unless
/// `x` is numerically positive definite.
pub fn cholesky(x: &CMatrix) -> Option<CMatrix> {
    let n = x.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = x[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = x[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix.
pub(crate) fn lower_inverse(l: &CMatrix) -> CMatrix {
    let n = l.rows();
    let mut inv = CMatrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// Inverse of a Hermitian positive definite matrix via Cholesky.
pub fn hpd_inverse(x: &CMatrix) -> Option<CMatrix> {
    let l = cholesky(x)?;
    let li = lower_inverse(&l);
    Some(li.adjoint_mul(&li))
}

/// Solves `a·X = b` for square complex `a` by Gaussian elimination with partial pivoting.
pub fn lu_solve_complex(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(Error::Dimension(alloc::format!("solve {}x{} against {} rows", a.rows(), a.cols(), b.rows())));
    }
    let m = b.cols();
    let mut lu = a.clone();
    let mut rhs = b.clone();
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if lu[(i, k)].norm() > lu[(p, k)].norm() {
                p = i;
            }
        }
        if lu[(p, k)].norm() == 0.0 {
            return Err(Error::Solver("singular linear system".into()));
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            for j in 0..m {
                let t = rhs[(k, j)];
                rhs[(k, j)] = rhs[(p, j)];
                rhs[(p, j)] = t;
            }
        }
        let d = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for j in k..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..m {
                let v = rhs[(k, j)];
                rhs[(i, j)] -= f * v;
            }
        }
    }
    let mut x = CMatrix::zeros(n, m);
    for j in 0..m {
        for i in (0..n).rev() {
            let mut s = rhs[(i, j)];
            for k in (i + 1)..n {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Dense real symmetric solve helper used by least-squares refinements:
/// minimum-norm solution of `J δ = r` through the eigen-decomposition of `J Jᵀ`.
pub(crate) fn min_norm_solve(j: &[Vec<f64>], r: &[f64], rel_cut: f64) -> Vec<f64> {
    let rows = j.len();
    let cols = if rows == 0 { 0 } else { j[0].len() };
    let jjt = CMatrix::from_fn(rows, rows, |a, b| {
        C64::new(j[a].iter().zip(&j[b]).map(|(x, y)| x * y).sum(), 0.0)
    });
    let eig = super::herm_eig_unchecked(&jjt);
    let top = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let mut z = vec![0.0; rows];
    let v = &eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= rel_cut * top || lam <= 0.0 {
            continue;
        }
        let coef: f64 = (0..rows).map(|a| v[(a, k)].re * r[a]).sum::<f64>() / lam;
        for a in 0..rows {
            z[a] += coef * v[(a, k)].re;
        }
    }
    (0..cols).map(|c| (0..rows).map(|a| j[a][c] * z[a]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{gaussian_matrix, op_norm};

    #[test]
    fn real_lu_solves() {
        let a = vec![4.0, 1.0, 2.0, 0.5, 3.0, 1.0, 2.0, -1.0, 5.0];
        let lu = RealLu::factor(3, a.clone()).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((s - (i + 1) as f64).abs() < 1e-13);
        }
        assert!(RealLu::factor(2, vec![1.0, 2.0, 2.0, 4.0]).is_none());
    }

    #[test]
    fn hpd_inverse_inverts() {
        let g = gaussian_matrix(4, 4, 3);
        let p = &g.adjoint_mul(&g) + &CMatrix::identity(4);
        let inv = hpd_inverse(&p).unwrap();
        assert!(op_norm(&(&p.matmul(&inv) - &CMatrix::identity(4))).unwrap() < 1e-12);
        assert!(cholesky(&CMatrix::diag_real(&[1.0, -1.0])).is_none());
    }

    #[test]
    fn complex_solve() {
        let a = gaussian_matrix(5, 5, 8);
        let b = gaussian_matrix(5, 2, 9);
        let x = lu_solve_complex(&a, &b).unwrap();
        assert!(op_norm(&(&a.matmul(&x) - &b)).unwrap() < 1e-11);
    }

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        // x + y = 2 has minimum-norm solution (1, 1); a duplicated row is harmless.
        let j = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let x = min_norm_solve(&j, &[2.0, 2.0], 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
