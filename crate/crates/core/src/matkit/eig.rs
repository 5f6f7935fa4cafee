use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{op_norm_unchecked, vec_dot, vec_norm, CMatrix, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
/// Off-diagonal cutoff relative to the Frobenius norm.
const OFF_DIAG_CUTOFF: f64 = 1e-15;

/// Eigen-decomposition `x = V·diag(λ)·V^*` of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermEigResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: CMatrix,
}

impl HermEigResult {
    /// Rebuilds `V·f(Λ)·V^*`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let mut scaled = v.clone();
        for j in 0..n {
            let s = f(self.eigenvalues[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled.mul_adjoint(v)
    }
}

/// Parameters of the 2×2 unitary that annihilates `a_pq` of a Hermitian
/// pencil with diagonal `(app, aqq)`. Returns `(c, s, phase)` where the
/// rotation is `J = [[c, s], [-s·conj(phase), c·conj(phase)]]`.
#[inline]
fn jacobi_params(app: f64, aqq: f64, apq: C64) -> (f64, f64, C64) {
    let r = apq.norm();
    let phase = apq / r;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    (c, t * c, phase)
}

/// Right-multiplies columns `p, q` of `m` by the Jacobi rotation.
#[inline]
fn rotate_cols(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let ph = phase.conj();
    for k in 0..m.rows() {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * c - akq * ph * s;
        m[(k, q)] = akp * s + akq * ph * c;
    }
}

/// Left-multiplies rows `p, q` of `m` by the adjoint of the Jacobi rotation.
#[inline]
fn rotate_rows_adjoint(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    for k in 0..m.cols() {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk * c - aqk * phase * s;
        m[(q, k)] = apk * s + aqk * phase * c;
    }
}

fn off_diag_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Hermitian eigensolver with input validation.
pub fn herm_eig(x: &CMatrix) -> Result<HermEigResult> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    if !x.is_square() {
        return Err(Error::Dimension(alloc::format!("herm_eig needs a square matrix, got {}x{}", x.rows(), x.cols())));
    }
    let defect = x.hermitian_defect();
    if defect > 1e-10 * op_norm_unchecked(x).max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    Ok(herm_eig_unchecked(x))
}

/// Cyclic Jacobi on the Hermitian part of `x`.
pub fn herm_eig_unchecked(x: &CMatrix) -> HermEigResult {
    let n = x.rows();
    let mut a = x.hermitian_part();
    let mut v = CMatrix::identity(n);
    let frob = a.frobenius();
    if frob > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diag_norm(&a) <= OFF_DIAG_CUTOFF * frob {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.norm() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let (c, s, phase) = jacobi_params(a[(p, p)].re, a[(q, q)].re, apq);
                    rotate_cols(&mut a, p, q, c, s, phase);
                    rotate_rows_adjoint(&mut a, p, q, c, s, phase);
                    rotate_cols(&mut v, p, q, c, s, phase);
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    HermEigResult { eigenvalues, eigenvectors }
}

/// Square root of the PSD part of a Hermitian matrix (negative eigenvalues clipped).
pub fn psd_sqrt(x: &CMatrix) -> CMatrix {
    herm_eig_unchecked(x).map_spectrum(|l| l.max(0.0).sqrt())
}

/// Full singular value decomposition `g = U·diag(σ)·V^*`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × rows` unitary.
    pub u: CMatrix,
    /// Descending, length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// `cols × cols` unitary.
    pub v: CMatrix,
}

/// Appends standard basis vectors until `cols` spans the whole space, then
/// re-orthonormalizes everything twice (Gram–Schmidt).
fn complete_orthonormal(mut cols: Vec<Vec<C64>>, dim: usize) -> CMatrix {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
    let mut candidates = core::mem::take(&mut cols);
    for e in 0..dim {
        let mut v = alloc::vec![C64::new(0.0, 0.0); dim];
        v[e] = C64::new(1.0, 0.0);
        candidates.push(v);
    }
    for mut w in candidates {
        if basis.len() == dim {
            break;
        }
        let before = vec_norm(&w);
        if before == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let proj = vec_dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let after = vec_norm(&w);
        if after > 1e-8 * before {
            for wi in w.iter_mut() {
                *wi /= after;
            }
            basis.push(w);
        }
    }
    let mut out = CMatrix::zeros(dim, dim);
    for (j, b) in basis.iter().enumerate() {
        out.set_col(j, b);
    }
    out
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(g: &CMatrix) -> Svd {
    let (m, n) = g.shape();
    if m < n {
        let t = svd(&g.adjoint());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let mut w = g.clone();
    let mut v = CMatrix::identity(n);
    let scale = g.frobenius();
    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, C64::new(0.0, 0.0));
                    for k in 0..m {
                        let wp = w[(k, p)];
                        let wq = w[(k, q)];
                        alpha += wp.norm_sqr();
                        beta += wq.norm_sqr();
                        gamma += wp.conj() * wq;
                    }
                    if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    rotated = true;
                    let (c, s, phase) = jacobi_params(alpha, beta, gamma);
                    rotate_cols(&mut w, p, q, c, s, phase);
                    rotate_cols(&mut v, p, q, c, s, phase);
                }
            }
            if !rotated {
                break;
            }
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| vec_norm(&w.col_vec(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let top = norms.iter().cloned().fold(0.0, f64::max);
    let mut ucols = Vec::new();
    for &j in &order {
        if norms[j] > 1e-13 * top && norms[j] > 0.0 {
            ucols.push(w.col_vec(j).into_iter().map(|z| z / norms[j]).collect());
        } else {
            break;
        }
    }
    let u = complete_orthonormal(ucols, m);
    let v_sorted = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    let singular_values = order.iter().map(|&j| norms[j]).collect();
    Svd { u, singular_values, v: v_sorted }
}

/// Unitary polar factor: the unitary `W` maximizing `Re tr(W^* g)`.
pub fn polar_unitary(g: &CMatrix) -> CMatrix {
    assert!(g.is_square(), "polar factor needs a square matrix");
    let s = svd(g);
    s.u.mul_adjoint(&s.v)
}

/// Largest singular value with its left and right singular vectors.
pub fn top_singular_pair(g: &CMatrix) -> (f64, Vec<C64>, Vec<C64>) {
    let s = svd(g);
    let sigma = s.singular_values.first().copied().unwrap_or(0.0);
    (sigma, s.u.col_vec(0), s.v.col_vec(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{c, gaussian_matrix, op_norm};

    fn reconstruction_error(x: &CMatrix, r: &HermEigResult) -> f64 {
        let rebuilt = r.map_spectrum(|l| l);
        op_norm(&(&rebuilt - x)).unwrap()
    }

    #[test]
    fn diagonal_and_swap() {
        let r = herm_eig(&CMatrix::diag_real(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(r.eigenvalues, alloc::vec![1.0, 2.0, 3.0]);
        let r = herm_eig(&CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        // Characteristic polynomial λ² - 1.
        assert!((r.eigenvalues[0] + 1.0).abs() < 1e-14 && (r.eigenvalues[1] - 1.0).abs() < 1e-14);
        let r = herm_eig(&CMatrix::identity(4)).unwrap();
        assert_eq!(r.eigenvalues, alloc::vec![1.0; 4]);
        assert!(r.eigenvectors.unitarity_residual() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(herm_eig(&x), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn random_hermitian_residuals() {
        for seed in 0..100 {
            let g = gaussian_matrix(6, 6, seed);
            let h = g.hermitian_part();
            let r = herm_eig(&h).unwrap();
            let scale = op_norm(&h).unwrap().max(1.0);
            assert!(reconstruction_error(&h, &r) <= 1e-10 * scale);
            assert!(r.eigenvectors.unitarity_residual() <= 1e-10);
            assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn complex_2x2_eigenvalues() {
        // [[2, i],[-i, 2]] has eigenvalues 1 and 3.
        let x = CMatrix::from_rows(&[&[c(2.0, 0.0), c(0.0, 1.0)], &[c(0.0, -1.0), c(2.0, 0.0)]]);
        let r = herm_eig(&x).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs() {
        for (i, &(m, n)) in [(3, 3), (4, 2), (2, 5), (6, 6)].iter().enumerate() {
            let g = gaussian_matrix(m, n, 40 + i as u64);
            let s = svd(&g);
            let mut sigma = CMatrix::zeros(m, n);
            for (j, v) in s.singular_values.iter().enumerate() {
                sigma[(j, j)] = c(*v, 0.0);
            }
            let rebuilt = s.u.matmul(&sigma).mul_adjoint(&s.v);
            assert!(op_norm(&(&rebuilt - &g)).unwrap() < 1e-12 * op_norm(&g).unwrap());
            assert!(s.u.unitarity_residual() < 1e-12 && s.v.unitarity_residual() < 1e-12);
            assert!((s.singular_values[0] - op_norm(&g).unwrap()).abs() < 1e-12 * s.singular_values[0]);
        }
    }

    #[test]
    fn polar_of_rank_deficient_is_unitary() {
        let g = CMatrix::diag_real(&[2.0, 0.0, 0.0]);
        let w = polar_unitary(&g);
        assert!(w.unitarity_residual() < 1e-12);
        assert!((w.adjoint_mul(&g).trace().re - 2.0).abs() < 1e-12);
        let g = gaussian_matrix(4, 4, 9);
        let w = polar_unitary(&g);
        // Re tr(W^* g) equals the nuclear norm.
        let nuclear: f64 = svd(&g).singular_values.iter().sum();
        assert!((w.adjoint_mul(&g).trace().re - nuclear).abs() < 1e-12 * nuclear);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let g = gaussian_matrix(5, 5, 77);
        let p = g.adjoint_mul(&g);
        let r = psd_sqrt(&p);
        assert!(op_norm(&(&r.matmul(&r) - &p)).unwrap() < 1e-11 * op_norm(&p).unwrap());
    }
}
