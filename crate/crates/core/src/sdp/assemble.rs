//! Builders for the two structured programs the toolkit solves.

use alloc::format;
use alloc::vec::Vec;

use super::program::{LmiProgram, Term};
use crate::dilation::{SpanSpec, UnitalMapSpec};
use crate::error::{Error, Result};
use crate::matkit::{c, CMatrix, C64};
use crate::norms::OperatorTuple;

/// Factorization program of a tuple.
///
/// Blocks `t_i = [[y_i, x_i*], [x_i, z_i]] ⪰ 0` (named `t{i}`), slacks
/// `s_y = λI − Σ y_i ⪰ 0` and `s_z = λI − Σ z_i ⪰ 0`, free scalar `lambda`;
/// minimize `λ`. The optimum is `inf ‖Σ a_i a_i*‖^{1/2} ‖Σ b_i* b_i‖^{1/2}`
/// over factorizations `x_i = a_i b_i`.
pub fn assemble_dec_program(t: &OperatorTuple) -> LmiProgram {
    let k = t.k();
    let mut p = LmiProgram::new();
    let blocks: Vec<_> = (0..t.len()).map(|i| p.add_block(format!("t{i}"), 2 * k)).collect();
    let sy = p.add_block("s_y", k);
    let sz = p.add_block("s_z", k);
    let lambda = p.add_scalar("lambda");
    let one = c(1.0, 0.0);

    for (i, (&b, x)) in blocks.iter().zip(t.items()).enumerate() {
        p.add_constraint(
            format!("corner{i}"),
            alloc::vec![Term::sub_block(b, 2 * k, k, k, 0, k, one)],
            x.clone(),
            false,
        );
    }
    for (name, slack, offset) in [("sum_y", sy, 0), ("sum_z", sz, k)] {
        let mut terms: Vec<Term> = blocks.iter().map(|&b| Term::sub_block(b, 2 * k, offset, k, offset, k, one)).collect();
        terms.push(Term::whole(slack, k, one));
        terms.push(Term::scalar(lambda, CMatrix::identity(k).scale_real(-1.0)));
        p.add_constraint(name, terms, CMatrix::zeros(k, k), true);
    }
    p.minimize_scalar(lambda, 1.0);
    p
}

/// `Φ(a) = Σ_ij a_ij C[i·m.., j·m..]` for the Choi matrix `C = Σ e_ij ⊗ Φ(e_ij)`.
pub fn choi_apply(choi: &CMatrix, k: usize, m: usize, a: &CMatrix) -> Result<CMatrix> {
    if choi.shape() != (k * m, k * m) || a.shape() != (k, k) {
        return Err(Error::Dimension(format!(
            "Choi matrix {}×{} does not act on {}×{} inputs with target dimension {m}",
            choi.rows(),
            choi.cols(),
            a.rows(),
            a.cols()
        )));
    }
    let mut out = CMatrix::zeros(m, m);
    for i in 0..k {
        for j in 0..k {
            let s = a[(i, j)];
            if s.re == 0.0 && s.im == 0.0 {
                continue;
            }
            for p in 0..m {
                for q in 0..m {
                    out[(p, q)] += s * choi[(i * m + p, j * m + q)];
                }
            }
        }
    }
    Ok(out)
}

/// `Φ_C(a)` as a sum of `k` terms `(e_iᵀ ⊗ I_m) C (a[i, :]ᵀ ⊗ I_m)`.
fn choi_terms(block: super::BlockId, k: usize, m: usize, a: &CMatrix) -> Vec<Term> {
    let mut terms = Vec::new();
    for i in 0..k {
        if a.row(i).iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            continue;
        }
        let left = CMatrix::from_fn(m, k * m, |p, col| if col == i * m + p { c(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let right = CMatrix::from_fn(k * m, m, |row, q| if row % m == q { a[(i, row / m)] } else { C64::new(0.0, 0.0) });
        terms.push(Term::block(block, left, right));
    }
    terms
}

/// Feasibility program for a completely positive `Φ: M_k → M_m` with
/// `Φ(u_i) = T(u_i)` and `Φ(1) = I_m`.
///
/// The single block is the Choi matrix, named `choi`.
pub fn assemble_choi_program(span: &SpanSpec, target: &UnitalMapSpec) -> Result<LmiProgram> {
    crate::dilation::check_compatible(span, target)?;
    let (k, m) = (span.k(), target.m());
    let mut p = LmiProgram::new();
    let choi = p.add_block("choi", k * m);
    p.add_constraint("unit", choi_terms(choi, k, m, &CMatrix::identity(k)), target.unit_image(), true);
    for (i, (u, img)) in span.unitaries().iter().zip(target.images()).enumerate() {
        p.add_constraint(format!("image{i}"), choi_terms(choi, k, m, u), img.clone(), false);
    }
    Ok(p)
}
