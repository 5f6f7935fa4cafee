//! Expansion of matrix constraints into real scalar equations.
//!
//! Each complex entry of a constraint becomes one or two real equations
//! `Re tr(A_b X_b) + Σ B_s w_s = b` with Hermitian `A_b`. Linearly dependent
//! equations are detected here: consistent ones are dropped, inconsistent
//! ones yield an exact Farkas witness without running the solver.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;

use super::program::{LmiProgram, Term};
use crate::error::{Error, Result};
use crate::matkit::{CMatrix, C64};

/// Rows whose residual after projection falls below this (relative) are dependent.
const DEPENDENT_TOL: f64 = 1e-10;
/// Rows between the two thresholds are too close to call.
const ILL_POSED_TOL: f64 = 1e-7;

/// Sparse Hermitian matrix stored as its nonzero entries (both triangles).
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseHerm {
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseHerm {
    fn from_dense(a: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                let v = a[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        SparseHerm { entries }
    }

    /// `Re tr(A X)`; valid for any square `X`.
    #[inline]
    pub fn apply(&self, x: &CMatrix) -> f64 {
        self.entries.iter().map(|&(r, c, v)| (v * x[(c, r)]).re).sum()
    }

    /// `out += s · A`.
    #[inline]
    pub fn add_scaled_to(&self, s: f64, out: &mut CMatrix) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += v * s;
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm_sqr()).sum()
    }
}

/// Where a real equation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RowOrigin {
    pub constraint: usize,
    pub row: usize,
    pub col: usize,
    pub imaginary: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    /// One entry per block that the row touches.
    pub blocks: Vec<(usize, SparseHerm)>,
    pub scalars: Vec<(usize, f64)>,
    pub rhs: f64,
    pub origin: RowOrigin,
}

/// Real standard form: `min Σ<C_b, X_b> + cᵀw` s.t. `A(X) + Bw = b`, `X ⪰ 0`.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub block_dims: Vec<usize>,
    pub n_scalars: usize,
    pub rows: Vec<Row>,
    pub cost_blocks: Vec<CMatrix>,
    pub cost_scalars: Vec<f64>,
}

#[derive(Debug)]
pub(crate) enum CompileOutcome {
    Ready(Compiled),
    /// Linear inconsistency; the witness is given per real row of the full expansion.
    Inconsistent { rows: Vec<RowOrigin>, witness: Vec<f64> },
}

/// Coordinates of a Hermitian matrix in an orthonormal real basis.
fn herm_coords(a: &CMatrix, out: &mut Vec<f64>) {
    let n = a.rows();
    let s2 = core::f64::consts::SQRT_2;
    for p in 0..n {
        out.push(a[(p, p)].re);
        for q in (p + 1)..n {
            out.push(s2 * a[(p, q)].re);
            out.push(s2 * a[(p, q)].im);
        }
    }
}

fn expand(program: &LmiProgram) -> Vec<(Vec<(usize, CMatrix)>, Vec<(usize, f64)>, f64, RowOrigin)> {
    let mut out = Vec::new();
    for (ci, con) in program.equality_constraints.iter().enumerate() {
        let (p, q) = con.rhs.shape();
        for a in 0..p {
            let b0 = if con.hermitian { a } else { 0 };
            for b in b0..q {
                let parts: &[bool] = if con.hermitian && a == b { &[false] } else { &[false, true] };
                for &imaginary in parts {
                    let mut blocks: Vec<(usize, CMatrix)> = Vec::new();
                    let mut scalars: Vec<(usize, f64)> = Vec::new();
                    for term in &con.terms {
                        match term {
                            Term::Block { block, left, right } => {
                                let dim = left.cols();
                                // Entry (a, b) of L X R equals tr(G X) with G = R[:, b] L[a, :].
                                let mut g = CMatrix::zeros(dim, dim);
                                for r in 0..dim {
                                    let rb = right[(r, b)];
                                    if rb.re == 0.0 && rb.im == 0.0 {
                                        continue;
                                    }
                                    for c in 0..dim {
                                        g[(r, c)] = rb * left[(a, c)];
                                    }
                                }
                                if imaginary {
                                    g = g.scale(C64::new(0.0, -1.0));
                                }
                                let h = g.hermitian_part();
                                match blocks.iter_mut().find(|(id, _)| *id == block.0) {
                                    Some((_, acc)) => *acc = &*acc + &h,
                                    None => blocks.push((block.0, h)),
                                }
                            }
                            Term::Scalar { var, coeff } => {
                                let z = coeff[(a, b)];
                                let v = if imaginary { z.im } else { z.re };
                                match scalars.iter_mut().find(|(id, _)| *id == var.0) {
                                    Some((_, acc)) => *acc += v,
                                    None => scalars.push((var.0, v)),
                                }
                            }
                        }
                    }
                    let z = con.rhs[(a, b)];
                    let rhs = if imaginary { z.im } else { z.re };
                    out.push((blocks, scalars, rhs, RowOrigin { constraint: ci, row: a, col: b, imaginary }));
                }
            }
        }
    }
    out
}

pub(crate) fn compile(program: &LmiProgram) -> Result<CompileOutcome> {
    program.validate()?;
    let block_dims: Vec<usize> = program.psd_blocks.iter().map(|b| b.dim).collect();
    let n_scalars = program.scalar_vars.len();
    let expanded = expand(program);

    // Dense coordinates for the rank test.
    let offsets: Vec<usize> = block_dims
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d * d;
            Some(o)
        })
        .collect();
    let width = block_dims.iter().map(|d| d * d).sum::<usize>() + n_scalars;
    let dense: Vec<Vec<f64>> = expanded
        .iter()
        .map(|(blocks, scalars, _, _)| {
            let mut v = vec![0.0; width];
            for (id, a) in blocks {
                let mut coords = Vec::with_capacity(block_dims[*id] * block_dims[*id]);
                herm_coords(a, &mut coords);
                v[offsets[*id]..offsets[*id] + coords.len()].copy_from_slice(&coords);
            }
            let so = width - n_scalars;
            for (id, s) in scalars {
                v[so + id] += s;
            }
            v
        })
        .collect();
    let rhs: Vec<f64> = expanded.iter().map(|e| e.2).collect();
    let m = expanded.len();

    // Modified Gram–Schmidt over the rows, tracking each orthonormal vector
    // as a combination of original rows.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut combos: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let rhs_scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..m {
        let norm0 = dense[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut w = dense[i].clone();
        let mut combo = vec![0.0; m];
        combo[i] = 1.0;
        for _ in 0..2 {
            for (q, qc) in basis.iter().zip(&combos) {
                let proj: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
                if proj != 0.0 {
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= proj * qi;
                    }
                    for (ci, qi) in combo.iter_mut().zip(qc) {
                        *ci -= proj * qi;
                    }
                }
            }
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = if norm0 > 0.0 { norm / norm0 } else { 0.0 };
        if norm0 > 0.0 && rel > ILL_POSED_TOL {
            for v in w.iter_mut() {
                *v /= norm;
            }
            for v in combo.iter_mut() {
                *v /= norm;
            }
            basis.push(w);
            combos.push(combo);
            kept.push(i);
        } else if norm0 > 0.0 && rel > DEPENDENT_TOL {
            return Err(Error::IllPosed(alloc::format!(
                "constraint rows are nearly dependent (relative residual {rel:e})"
            )));
        } else {
            // combo · rows ≈ 0; the system is consistent iff combo · rhs ≈ 0.
            let combo_norm = combo.iter().map(|v| v * v).sum::<f64>().sqrt();
            let value: f64 = combo.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            if value.abs() > 1e-9 * combo_norm * rhs_scale {
                let sign = value.signum();
                let witness = combo.iter().map(|v| v * sign / combo_norm).collect();
                return Ok(CompileOutcome::Inconsistent {
                    rows: expanded.iter().map(|e| e.3).collect(),
                    witness,
                });
            }
        }
    }

    let rows = kept
        .into_iter()
        .map(|i| {
            let (blocks, scalars, rhs, origin) = &expanded[i];
            Row {
                blocks: blocks
                    .iter()
                    .filter(|(_, a)| a.max_abs() > 0.0)
                    .map(|(id, a)| (*id, SparseHerm::from_dense(a)))
                    .collect(),
                scalars: scalars.iter().filter(|(_, v)| *v != 0.0).cloned().collect(),
                rhs: *rhs,
                origin: *origin,
            }
        })
        .collect();

    let mut cost_blocks: Vec<CMatrix> = block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
    for (b, cost) in &program.objective.blocks {
        cost_blocks[b.0] = &cost_blocks[b.0] + &cost.hermitian_part();
    }
    let mut cost_scalars = vec![0.0; n_scalars];
    for (s, cost) in &program.objective.scalars {
        cost_scalars[s.0] += cost;
    }
    Ok(CompileOutcome::Ready(Compiled { block_dims, n_scalars, rows, cost_blocks, cost_scalars }))
}

/// Folds real multipliers back into one complex matrix per constraint.
pub(crate) fn multipliers_to_matrices(program: &LmiProgram, origins: &[RowOrigin], y: &[f64]) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = program
        .equality_constraints
        .iter()
        .map(|c| CMatrix::zeros(c.rhs.rows(), c.rhs.cols()))
        .collect();
    for (o, v) in origins.iter().zip(y) {
        let z = if o.imaginary { C64::new(0.0, *v) } else { C64::new(*v, 0.0) };
        out[o.constraint][(o.row, o.col)] += z;
    }
    out
}
