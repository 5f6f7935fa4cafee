//! Haagerup-norm bounds for `Σ c_l ⊗ d_l ∈ M_k ⊗ M_m`.
//!
//! Upper: minimize `‖Σ G_pq c_p c_q*‖^{1/2} ‖Σ (G⁻¹)_pq d_p* d_q‖^{1/2}` over
//! positive definite `G` on the middle index, the reparameterizations
//! `c' = c·T`, `d' = T⁻¹·d` with `G = T T*`. The problem is solved exactly as
//! a semidefinite program. Lower: represent both factors on a common space
//! and evaluate `‖Σ σ₁(c_l) σ₂(d_l)‖`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::types::{FactorizationCertificate, HTensorElement};
use crate::error::{Error, Result};
use crate::matkit::{
    haar_isometry, herm_eig_unchecked, kron, normalize, op_norm_unchecked, random_unit_vector, svd, CMatrix, C64,
};
use crate::sdp::{solve, LmiProgram, SdpStatus, Term};
use crate::seed::derive;

/// Realignment singular values below this (relative) are dropped.
pub const SCHMIDT_CUT: f64 = 1e-12;
/// Gram eigenvalues are floored at this fraction of the largest one.
pub const GRAM_FLOOR: f64 = 1e-12;

/// Minimal-length decomposition from the SVD of the realigned matrix.
///
/// Returns `None` when the element is zero.
pub fn operator_schmidt(x: &HTensorElement) -> Option<HTensorElement> {
    let (k, m) = (x.k(), x.m());
    // R[(i·k + j), (p·m + q)] = Σ_l c_l[i, j] d_l[p, q].
    let mut r = CMatrix::zeros(k * k, m * m);
    for (c, d) in x.terms() {
        for (ij, cv) in c.as_slice().iter().enumerate() {
            if cv.re == 0.0 && cv.im == 0.0 {
                continue;
            }
            for (pq, dv) in d.as_slice().iter().enumerate() {
                r[(ij, pq)] += cv * dv;
            }
        }
    }
    let s = svd(&r);
    let top = s.singular_values.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return None;
    }
    let terms: Vec<(CMatrix, CMatrix)> = s
        .singular_values
        .iter()
        .enumerate()
        .take_while(|(_, &sv)| sv > SCHMIDT_CUT * top)
        .map(|(l, &sv)| {
            let w = sv.sqrt();
            let c = CMatrix::new(k, k, s.u.col_vec(l).into_iter().map(|z| z * w).collect()).expect("k·k entries");
            let d = CMatrix::new(m, m, s.v.col_vec(l).into_iter().map(|z| z.conj() * w).collect()).expect("m·m entries");
            (c, d)
        })
        .collect();
    HTensorElement::new(terms).ok()
}

fn row_col(terms: &[(CMatrix, CMatrix)]) -> (f64, f64) {
    let (k, m) = (terms[0].0.rows(), terms[0].1.rows());
    let mut cc = CMatrix::zeros(k, k);
    let mut dd = CMatrix::zeros(m, m);
    for (c, d) in terms {
        cc = &cc + &c.mul_adjoint(c);
        dd = &dd + &d.adjoint_mul(d);
    }
    (op_norm_unchecked(&cc), op_norm_unchecked(&dd))
}

/// `(I_L ⊗ e_a)`: the `(L·n)×L` matrix with ones at `(p·n + a, p)`.
fn spread(l: usize, n: usize, a: usize) -> CMatrix {
    CMatrix::from_fn(l * n, l, |row, p| if row == p * n + a { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

fn gram_program(terms: &[(CMatrix, CMatrix)]) -> LmiProgram {
    let l = terms.len();
    let (k, m) = (terms[0].0.rows(), terms[0].1.rows());
    let mut p = LmiProgram::new();
    let g = p.add_block("gram", l);
    let big = p.add_block("schur", l * m + m);
    let q = p.add_block("row_slack", k);
    let t = p.add_scalar("t");
    let one = C64::new(1.0, 0.0);

    // schur = [[G ⊗ I_m, D], [D*, t I_m]] with D the column stack of the d_q.
    let mut terms_gram = vec![Term::sub_block(big, l * m + m, 0, l * m, 0, l * m, one)];
    for a in 0..m {
        let s = spread(l, m, a);
        terms_gram.push(Term::block(g, s.scale_real(-1.0), s.adjoint()));
    }
    p.add_constraint("gram_kron", terms_gram, CMatrix::zeros(l * m, l * m), true);
    let d_adj = CMatrix::from_fn(m, l * m, |b, col| terms[col / m].1[(col % m, b)].conj());
    p.add_constraint("coupling", vec![Term::sub_block(big, l * m + m, l * m, m, 0, l * m, one)], d_adj, false);
    p.add_constraint(
        "corner",
        vec![
            Term::sub_block(big, l * m + m, l * m, m, l * m, m, one),
            Term::scalar(t, CMatrix::identity(m).scale_real(-1.0)),
        ],
        CMatrix::zeros(m, m),
        true,
    );

    // row_slack + Σ G_pq c_p c_q* = I_k.
    let mut terms_row = vec![Term::whole(q, k, one)];
    for a in 0..k {
        let left = CMatrix::from_fn(k, l, |r, col| terms[col].0[(r, a)]);
        terms_row.push(Term::block(g, left.clone(), left.adjoint()));
    }
    p.add_constraint("row_bound", terms_row, CMatrix::identity(k), true);
    p.minimize_scalar(t, 1.0);
    p
}

/// Reparameterized terms `c'_j = Σ_p c_p T_pj`, `d'_j = Σ_q (T⁻¹)_jq d_q`, `T = G^{1/2}`.
fn reparameterize(terms: &[(CMatrix, CMatrix)], gram: &CMatrix) -> Vec<(CMatrix, CMatrix)> {
    let eig = herm_eig_unchecked(&gram.hermitian_part());
    let top = eig.eigenvalues.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let floor = GRAM_FLOOR * top;
    let t = eig.map_spectrum(|v| v.max(floor).sqrt());
    let t_inv = eig.map_spectrum(|v| 1.0 / v.max(floor).sqrt());
    let l = terms.len();
    (0..l)
        .map(|j| {
            let mut c = CMatrix::zeros(terms[0].0.rows(), terms[0].0.cols());
            let mut d = CMatrix::zeros(terms[0].1.rows(), terms[0].1.cols());
            for p in 0..l {
                c.axpy(t[(p, j)], &terms[p].0);
                d.axpy(t_inv[(j, p)], &terms[p].1);
            }
            (c, d)
        })
        .collect()
}

fn certificate(x: &HTensorElement, mut terms: Vec<(CMatrix, CMatrix)>) -> FactorizationCertificate {
    let (nc, nd) = row_col(&terms);
    if nc > 0.0 && nd > 0.0 {
        let s = (nd / nc).sqrt().sqrt();
        for (c, d) in terms.iter_mut() {
            *c = c.scale_real(s);
            *d = d.scale_real(1.0 / s);
        }
    }
    let (nc, nd) = row_col(&terms);
    let rebuilt = HTensorElement::new(terms.clone()).expect("same shapes").to_matrix();
    let residual = op_norm_unchecked(&(&rebuilt - &x.to_matrix()));
    let (a, b) = terms.into_iter().unzip();
    FactorizationCertificate { a, b, value: nc.sqrt() * nd.sqrt(), residual }
}

/// Upper bound on the Haagerup norm with an explicit decomposition.
///
/// The decomposition starts from the operator-Schmidt form and is
/// reparameterized by the optimal Gram matrix; `max_iter` bounds the
/// interior point iterations. The returned value is the certificate's own
/// value, recomputed from the factors.
pub fn haagerup_upper(x: &HTensorElement, max_iter: usize) -> Result<(f64, FactorizationCertificate)> {
    let Some(schmidt) = operator_schmidt(x) else {
        let terms = vec![(CMatrix::zeros(x.k(), x.k()), CMatrix::zeros(x.m(), x.m()))];
        return Ok((0.0, certificate(x, terms)));
    };
    let terms = schmidt.terms();
    if terms.len() == 1 {
        let cert = certificate(x, terms.to_vec());
        return Ok((cert.value, cert));
    }
    // Normalize so the program is well scaled; the Gram matrix is scale-free.
    let scale = terms.iter().map(|(c, d)| c.frobenius() * d.frobenius()).fold(0.0, f64::max);
    let w = 1.0 / scale.sqrt();
    let unit: Vec<(CMatrix, CMatrix)> = terms.iter().map(|(c, d)| (c.scale_real(w), d.scale_real(w))).collect();
    let program = gram_program(&unit);
    let sol = solve(&program, 1e-9, max_iter)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver(alloc::format!(
            "Gram program ended with status {:?}: {}",
            sol.status,
            sol.diagnostic.unwrap_or_default()
        )));
    }
    let gram = sol.primal_values.block(program.block_by_name("gram").expect("declared"));
    let cert = certificate(x, reparameterize(terms, gram));
    Ok((cert.value, cert))
}

/// Best representation value found and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaagerupLower {
    pub value: f64,
    /// Multiplicities of the two factor representations.
    pub multiplicities: (usize, usize),
    /// `W = V₁* V₂`, the contraction linking the two representation spaces.
    pub contraction: CMatrix,
}

/// `Σ (I_μ₁ ⊗ c_l) W (I_μ₂ ⊗ d_l)`.
fn represented(terms: &[(CMatrix, CMatrix)], w: &CMatrix, mu1: usize, mu2: usize) -> CMatrix {
    let mut out = CMatrix::zeros(w.rows(), w.cols());
    for (c, d) in terms {
        let left = kron(&CMatrix::identity(mu1), c);
        let right = kron(&CMatrix::identity(mu2), d);
        out = &out + &left.matmul(w).matmul(&right);
    }
    out
}

/// Alternating maximization of `Re ξ* M(W) η` over unit `ξ`, `η` and contractions `W`.
fn polish(terms: &[(CMatrix, CMatrix)], w: &mut CMatrix, mu1: usize, mu2: usize, seed: u64) {
    let lefts: Vec<CMatrix> = terms.iter().map(|(c, _)| kron(&CMatrix::identity(mu1), c)).collect();
    let rights: Vec<CMatrix> = terms.iter().map(|(_, d)| kron(&CMatrix::identity(mu2), d)).collect();
    let mut eta = random_unit_vector(w.cols(), seed);
    let mut last = f64::NEG_INFINITY;
    for _ in 0..300 {
        let m = represented(terms, w, mu1, mu2);
        let mut xi = m.matvec(&eta);
        normalize(&mut xi);
        eta = m.adjoint_matvec(&xi);
        normalize(&mut eta);
        // K = Σ R_l η ξ* L_l; the best contraction is the partial isometry V U* of K = U Σ V*.
        let mut k = CMatrix::zeros(w.cols(), w.rows());
        for (l, r) in lefts.iter().zip(&rights) {
            let re = r.matvec(&eta);
            let lx = l.adjoint_matvec(&xi);
            for (i, a) in re.iter().enumerate() {
                for (j, b) in lx.iter().enumerate() {
                    k[(i, j)] += a * b.conj();
                }
            }
        }
        let s = svd(&k);
        let rank = s.singular_values.len();
        *w = CMatrix::from_fn(w.rows(), w.cols(), |i, j| {
            (0..rank).map(|r| s.v[(i, r)] * s.u[(j, r)].conj()).sum()
        });
        let value: f64 = s.singular_values.iter().sum();
        if value - last <= 1e-13 * value.max(1e-300) {
            break;
        }
        last = value;
    }
}

/// How many of the best samples get the ascent polish.
pub const POLISHED_SAMPLES: usize = 8;

/// Lower bound `sup ‖Σ σ₁(c_l) σ₂(d_l)‖` over sampled pairs of representations.
///
/// Each sample embeds `M_k` and `M_m` with multiplicities `μ₁, μ₂ ≤ mult_max`
/// through Haar-random isometries into a common space of dimension
/// `D ≥ max(μ₁k, μ₂m)`; when `D = μ₁k` (or `μ₂m`) that side is unital and
/// otherwise it is a compression. Only `W = V₁* V₂` enters the value. The
/// best samples are then polished by alternating ascent over `W`.
pub fn haagerup_rep_lower(x: &HTensorElement, samples: usize, mult_max: usize, seed: u64) -> Result<HaagerupLower> {
    if mult_max == 0 {
        return Err(Error::InvalidArgument("multiplicity bound must be positive".into()));
    }
    let (k, m) = (x.k(), x.m());
    let Some(schmidt) = operator_schmidt(x) else {
        return Ok(HaagerupLower { value: 0.0, multiplicities: (1, 1), contraction: CMatrix::zeros(k, m) });
    };
    let terms = schmidt.terms();

    // Sample 0 is the pair of identity representations when k = m.
    let sample = |s: usize| -> (f64, usize, usize, CMatrix) {
        if s == 0 && k == m {
            let w = CMatrix::identity(k);
            return (op_norm_unchecked(&represented(terms, &w, 1, 1)), 1, 1, w);
        }
        let h = derive(seed, &[s as u64]);
        let mu1 = 1 + (derive(h, &[1]) % mult_max as u64) as usize;
        let mu2 = 1 + (derive(h, &[2]) % mult_max as u64) as usize;
        let base = (mu1 * k).max(mu2 * m);
        let pad = if derive(h, &[3]) % 2 == 0 { 0 } else { (derive(h, &[4]) % (base as u64 + 1)) as usize };
        let dim = base + pad;
        let v1 = haar_isometry(dim, mu1 * k, derive(h, &[5])).expect("dim ≥ μ₁k");
        let v2 = haar_isometry(dim, mu2 * m, derive(h, &[6])).expect("dim ≥ μ₂m");
        let w = v1.adjoint_mul(&v2);
        (op_norm_unchecked(&represented(terms, &w, mu1, mu2)), mu1, mu2, w)
    };
    let mut results = crate::par::map_indexed(samples.max(1), sample);
    // Stable order: value descending, then sample index.
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[b].0.total_cmp(&results[a].0).then(a.cmp(&b)));
    let polished = crate::par::map_indexed(POLISHED_SAMPLES.min(order.len()), |j| {
        let (_, mu1, mu2, ref w0) = results[order[j]];
        let mut w = w0.clone();
        polish(terms, &mut w, mu1, mu2, derive(seed, &[u64::MAX, j as u64]));
        (op_norm_unchecked(&represented(terms, &w, mu1, mu2)), mu1, mu2, w)
    });
    results.extend(polished);
    let best = results
        .into_iter()
        .fold(None::<(f64, usize, usize, CMatrix)>, |acc, r| match acc {
            Some(a) if a.0 >= r.0 => Some(a),
            _ => Some(r),
        })
        .expect("at least one sample");
    Ok(HaagerupLower { value: best.0, multiplicities: (best.1, best.2), contraction: best.3 })
}
