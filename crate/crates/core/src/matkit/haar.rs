use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::{vec_dot, vec_norm, CMatrix, C64};
use crate::error::{Error, Result};

fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn complex_gaussian(r: &mut ChaCha12Rng) -> C64 {
    let re: f64 = r.sample(StandardNormal);
    let im: f64 = r.sample(StandardNormal);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries (`E|z|² = 1`).
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut r = rng(seed);
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut r))
}

/// Uniformly distributed unit vector in `C^n`.
pub fn random_unit_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut r = rng(seed);
    loop {
        let mut v: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut r)).collect();
        let norm = vec_norm(&v);
        if norm > 1e-12 {
            v.iter_mut().for_each(|z| *z /= norm);
            return v;
        }
    }
}

/// Orthonormalizes the columns of a Gaussian matrix.
///
/// Gram–Schmidt (applied twice per column) produces the QR factor with a
/// positive real diagonal in `R`, which is exactly the phase normalization
/// that makes `Q` Haar distributed.
fn orthonormal_columns(g: &CMatrix) -> Option<CMatrix> {
    let (n, k) = g.shape();
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut w = g.col_vec(j);
        for _ in 0..2 {
            for q in &cols {
                let proj = vec_dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= proj * qi;
                }
            }
        }
        let norm = vec_norm(&w);
        if norm < 1e-10 {
            return None;
        }
        w.iter_mut().for_each(|z| *z /= norm);
        cols.push(w);
    }
    let mut q = CMatrix::zeros(n, k);
    for (j, col) in cols.iter().enumerate() {
        q.set_col(j, col);
    }
    Some(q)
}

/// Haar-distributed `d×d` unitary, deterministic in `(d, seed)`.
pub fn haar_unitary(d: usize, seed: u64) -> Result<CMatrix> {
    haar_isometry(d, d, seed)
}

/// First `k` columns of a Haar unitary of dimension `n`.
pub fn haar_isometry(n: usize, k: usize, seed: u64) -> Result<CMatrix> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument(alloc::format!("haar sample needs positive dimensions, got {n}x{k}")));
    }
    if k > n {
        return Err(Error::Dimension(alloc::format!("isometry {n}x{k} needs k <= n")));
    }
    let mut attempt = 0u64;
    loop {
        let g = gaussian_matrix(n, k, seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        if let Some(q) = orthonormal_columns(&g) {
            return Ok(q);
        }
        attempt += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_is_a_phase() {
        let u = haar_unitary(1, 11).unwrap();
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_unitary() {
        for d in 1..=8 {
            let a = haar_unitary(d, 5).unwrap();
            let b = haar_unitary(d, 5).unwrap();
            assert_eq!(a, b);
            assert!(a.unitarity_residual() <= 1e-10, "d={d}");
        }
        assert_ne!(haar_unitary(3, 1).unwrap(), haar_unitary(3, 2).unwrap());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(haar_unitary(0, 1).is_err());
    }

    #[test]
    fn isometry_columns_orthonormal() {
        let v = haar_isometry(7, 3, 4).unwrap();
        assert!(v.isometry_residual() < 1e-12);
    }

    #[test]
    fn second_moment_of_trace() {
        // ∫ |tr U|² dU = 1 over the Haar measure.
        let n = 10_000;
        let mean: f64 = (0..n).map(|s| haar_unitary(3, 1_000 + s).unwrap().trace().norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }
}
