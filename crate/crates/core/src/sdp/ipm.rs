//! Infeasible-start primal–dual interior point method (HKM direction with
//! Mehrotra predictor–corrector) on Hermitian blocks plus free scalars.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;

use super::compile::{Compiled, Row};
use crate::matkit::{cholesky, herm_eig_unchecked, hpd_inverse, lower_inverse, CMatrix, RealLu};

#[derive(Debug, Clone)]
pub(crate) struct IpmState {
    pub x: Vec<CMatrix>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<CMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmExit {
    Converged,
    /// The dual iterates trace an improving ray: the primal is infeasible.
    DualRay,
    /// The primal objective runs off to -∞.
    Unbounded,
    MaxIterations,
    /// Factorization breakdown or stalled progress.
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub exit: IpmExit,
    pub state: IpmState,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub rel_gap: f64,
    pub iterations: usize,
}

fn apply_rows(rows: &[Row], x: &[CMatrix], w: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            let mut v: f64 = r.blocks.iter().map(|(b, a)| a.apply(&x[*b])).sum();
            for (s, c) in &r.scalars {
                v += c * w[*s];
            }
            v
        })
        .collect()
}

fn adjoint_rows(p: &Compiled, y: &[f64]) -> (Vec<CMatrix>, Vec<f64>) {
    let mut blocks: Vec<CMatrix> = p.block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
    let mut scalars = vec![0.0; p.n_scalars];
    for (r, &yi) in p.rows.iter().zip(y) {
        if yi == 0.0 {
            continue;
        }
        for (b, a) in &r.blocks {
            a.add_scaled_to(yi, &mut blocks[*b]);
        }
        for (s, c) in &r.scalars {
            scalars[*s] += c * yi;
        }
    }
    (blocks, scalars)
}

fn inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.real_inner(y)).sum()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest `α ≤ cap` keeping `x + α·dx ⪰ 0`, given the Cholesky factor of `x`.
fn max_step(x: &CMatrix, dx: &CMatrix) -> f64 {
    let Some(l) = cholesky(x) else { return 0.0 };
    let li = lower_inverse(&l);
    let t = li.matmul(dx).mul_adjoint(&li);
    let lmin = herm_eig_unchecked(&t).eigenvalues.first().copied().unwrap_or(0.0);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

/// Factors the Schur system, adding a growing multiple of the identity to
/// the constraint block when it is numerically singular. This happens near
/// optimal faces of programs without strictly feasible points.
fn factor_regularized(dim: usize, m: usize, schur: Vec<f64>) -> Option<RealLu> {
    let max_diag = (0..m).map(|i| schur[i * dim + i].abs()).fold(0.0f64, f64::max).max(1e-300);
    let mut attempt = schur.clone();
    for j in 0..5 {
        if let Some(lu) = RealLu::factor(dim, attempt) {
            if lu.pivot_ratio() < 1e15 {
                return Some(lu);
            }
        }
        let delta = max_diag * 1e-14 * 100f64.powi(j);
        attempt = schur.clone();
        for i in 0..m {
            attempt[i * dim + i] += delta;
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

pub(crate) fn run(p: &Compiled, settings: IpmSettings) -> IpmOutcome {
    let m = p.rows.len();
    let nf = p.n_scalars;
    let nb = p.block_dims.len();
    let n_total: usize = p.block_dims.iter().sum::<usize>().max(1);
    let b: Vec<f64> = p.rows.iter().map(|r| r.rhs).collect();
    let b_norm = norm2(&b);
    let c_norm = (p.cost_blocks.iter().map(|c| c.frobenius().powi(2)).sum::<f64>()
        + p.cost_scalars.iter().map(|v| v * v).sum::<f64>())
    .sqrt();

    // Starting point in the spirit of the usual infeasible-start heuristics.
    let row_norms: Vec<f64> = p
        .rows
        .iter()
        .map(|r| (r.blocks.iter().map(|(_, a)| a.frobenius_sq()).sum::<f64>()).sqrt())
        .collect();
    let sqrt_n = (n_total as f64).sqrt();
    let mut xi = 10.0f64.max(sqrt_n);
    for (bi, rn) in b.iter().zip(&row_norms) {
        xi = xi.max(sqrt_n * (1.0 + bi.abs()) / (1.0 + rn));
    }
    let mut eta = 10.0f64.max(sqrt_n).max(c_norm);
    for rn in &row_norms {
        eta = eta.max(*rn);
    }
    let mut st = IpmState {
        x: p.block_dims.iter().map(|&d| CMatrix::identity(d).scale_real(xi)).collect(),
        w: vec![0.0; nf],
        y: vec![0.0; m],
        s: p.block_dims.iter().map(|&d| CMatrix::identity(d).scale_real(eta)).collect(),
    };

    let objectives = |st: &IpmState| -> (f64, f64) {
        let pobj = inner(&p.cost_blocks, &st.x) + p.cost_scalars.iter().zip(&st.w).map(|(a, b)| a * b).sum::<f64>();
        let dobj = b.iter().zip(&st.y).map(|(a, b)| a * b).sum::<f64>();
        (pobj, dobj)
    };

    let mut best_pinf = f64::INFINITY;
    let mut stall = 0usize;
    let mut iterations = 0usize;
    let exit;
    let mut rel_gap;

    loop {
        let (pobj, dobj) = objectives(&st);
        let ax = apply_rows(&p.rows, &st.x, &st.w);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let (aty, bty) = adjoint_rows(p, &st.y);
        let rd: Vec<CMatrix> = (0..nb).map(|k| &(&p.cost_blocks[k] - &aty[k]) - &st.s[k]).collect();
        let rf: Vec<f64> = p.cost_scalars.iter().zip(&bty).map(|(c, v)| c - v).collect();
        let mu = inner(&st.x, &st.s) / n_total as f64;

        rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = norm2(&rp) / (1.0 + b_norm);
        let dinf = (rd.iter().map(|r| r.frobenius().powi(2)).sum::<f64>() + rf.iter().map(|v| v * v).sum::<f64>())
            .sqrt()
            / (1.0 + c_norm);

        if rel_gap <= settings.gap_tol && pinf <= settings.feas_tol && dinf <= settings.feas_tol {
            exit = IpmExit::Converged;
            break;
        }
        if iterations >= settings.max_iter {
            exit = IpmExit::MaxIterations;
            break;
        }

        // Improving dual ray: A*(ŷ) ⪯ 0 (up to the residual), Bᵀŷ ≈ 0, bᵀŷ > 0.
        let ynorm = norm2(&st.y);
        if ynorm > 1e6 * (1.0 + c_norm) {
            let scale = 1.0 / ynorm;
            let ray_value = dobj * scale;
            let max_eig = aty
                .iter()
                .map(|a| herm_eig_unchecked(&a.scale_real(scale)).eigenvalues.last().copied().unwrap_or(0.0))
                .fold(f64::NEG_INFINITY, f64::max);
            let free = bty.iter().map(|v| (v * scale).abs()).fold(0.0, f64::max);
            if ray_value > 1e-8 && max_eig <= 1e-8 && free <= 1e-8 {
                exit = IpmExit::DualRay;
                break;
            }
        }
        if pobj < -1e10 * (1.0 + b_norm + c_norm) {
            exit = IpmExit::Unbounded;
            break;
        }
        if pinf < 0.5 * best_pinf || pinf <= settings.feas_tol {
            best_pinf = best_pinf.min(pinf);
            stall = 0;
        } else {
            stall += 1;
            if stall > 50 {
                exit = IpmExit::Stalled;
                break;
            }
        }

        let Some(s_inv) = st.s.iter().map(hpd_inverse).collect::<Option<Vec<_>>>() else {
            exit = IpmExit::Stalled;
            break;
        };

        // Schur complement M_ij = Σ_b Re tr(A_ib X_b A_jb S_b⁻¹).
        let mut schur = vec![0.0; (m + nf) * (m + nf)];
        let dim = m + nf;
        let xa_sinv: Vec<Vec<(usize, CMatrix)>> = p
            .rows
            .iter()
            .map(|r| {
                r.blocks
                    .iter()
                    .map(|(bk, a)| {
                        let x = &st.x[*bk];
                        let si = &s_inv[*bk];
                        let n = x.rows();
                        let mut out = CMatrix::zeros(n, n);
                        for &(rr, cc, v) in &a.entries {
                            for i in 0..n {
                                let xv = x[(i, rr)] * v;
                                if xv.re == 0.0 && xv.im == 0.0 {
                                    continue;
                                }
                                for j in 0..n {
                                    out[(i, j)] += xv * si[(cc, j)];
                                }
                            }
                        }
                        (*bk, out)
                    })
                    .collect()
            })
            .collect();
        for j in 0..m {
            for i in j..m {
                let mut v = 0.0;
                for (bk, a) in &p.rows[i].blocks {
                    for (bj, y) in &xa_sinv[j] {
                        if bj == bk {
                            v += a.apply(y);
                        }
                    }
                }
                schur[i * dim + j] = v;
                schur[j * dim + i] = v;
            }
            for (s, c) in &p.rows[j].scalars {
                schur[j * dim + m + s] = *c;
                schur[(m + s) * dim + j] = *c;
            }
        }
        let Some(lu) = factor_regularized(dim, m, schur) else {
            exit = IpmExit::Stalled;
            break;
        };

        // Direction for a given complementarity target K: ΔX = K − X ΔS S⁻¹.
        let direction = |k: &[CMatrix]| -> (Vec<f64>, Vec<f64>, Vec<CMatrix>, Vec<CMatrix>) {
            let z: Vec<CMatrix> = (0..nb).map(|bk| &k[bk] - &st.x[bk].matmul(&rd[bk]).matmul(&s_inv[bk])).collect();
            let az = apply_rows(&p.rows, &z, &vec![0.0; nf]);
            let mut rhs: Vec<f64> = rp.iter().zip(&az).map(|(a, b)| a - b).collect();
            rhs.extend_from_slice(&rf);
            let sol = lu.solve(&rhs);
            let dy = sol[..m].to_vec();
            let dw = sol[m..].to_vec();
            let (atdy, _) = adjoint_rows(p, &dy);
            let ds: Vec<CMatrix> = (0..nb).map(|bk| &rd[bk] - &atdy[bk]).collect();
            let dx: Vec<CMatrix> = (0..nb)
                .map(|bk| (&k[bk] - &st.x[bk].matmul(&ds[bk]).matmul(&s_inv[bk])).hermitian_part())
                .collect();
            (dy, dw, dx, ds)
        };
        let steps = |dx: &[CMatrix], ds: &[CMatrix]| -> (f64, f64) {
            let ap = (0..nb).map(|bk| max_step(&st.x[bk], &dx[bk])).fold(f64::INFINITY, f64::min);
            let ad = (0..nb).map(|bk| max_step(&st.s[bk], &ds[bk])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // Predictor.
        let k_aff: Vec<CMatrix> = st.x.iter().map(|x| -x).collect();
        let (_, _, dx_a, ds_a) = direction(&k_aff);
        let (ap, ad) = steps(&dx_a, &ds_a);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for bk in 0..nb {
            let xa = &st.x[bk] + &dx_a[bk].scale_real(ap);
            let sa = &st.s[bk] + &ds_a[bk].scale_real(ad);
            mu_aff += xa.real_inner(&sa);
        }
        mu_aff /= n_total as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).max(0.0).min(1.0).powi(3) } else { 0.0 };

        // Corrector: K = σμS⁻¹ − X − ΔX_a ΔS_a S⁻¹.
        let k_cor: Vec<CMatrix> = (0..nb)
            .map(|bk| {
                let mut k = s_inv[bk].scale_real(sigma * mu);
                k = &k - &st.x[bk];
                &k - &dx_a[bk].matmul(&ds_a[bk]).matmul(&s_inv[bk])
            })
            .collect();
        let (dy, dw, dx, ds) = direction(&k_cor);
        let (ap, ad) = steps(&dx, &ds);
        let gamma = if rel_gap < 1e-5 { 0.99 } else { 0.95 };
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            exit = IpmExit::Stalled;
            break;
        }
        for bk in 0..nb {
            st.x[bk] = (&st.x[bk] + &dx[bk].scale_real(ap)).hermitian_part();
            st.s[bk] = (&st.s[bk] + &ds[bk].scale_real(ad)).hermitian_part();
        }
        for (wi, d) in st.w.iter_mut().zip(&dw) {
            *wi += ap * d;
        }
        for (yi, d) in st.y.iter_mut().zip(&dy) {
            *yi += ad * d;
        }
        iterations += 1;
    }

    let (pobj, dobj) = objectives(&st);
    IpmOutcome { exit, state: st, primal_objective: pobj, dual_objective: dobj, rel_gap, iterations }
}
