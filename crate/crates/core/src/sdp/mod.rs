//! A small dense semidefinite-program solver.
//!
//! Programs are stated over Hermitian PSD matrix variables and free real
//! scalars with matrix-valued equality constraints (see [`LmiProgram`]).
//! [`solve`] returns either an optimal primal–dual pair with a certified
//! relative duality gap, or a Farkas witness for infeasibility.

mod assemble;
mod compile;
mod ipm;
mod program;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


pub use assemble::{assemble_choi_program, assemble_dec_program, choi_apply};
pub use program::{
    BlockId, DualCertificate, EqualityConstraint, FarkasCheck, LmiProgram, Objective, PrimalValues, PsdBlock,
    ScalarId, SdpSolution, SdpStatus, Term,
};

use crate::error::{Error, Result};
use crate::matkit::{CMatrix, C64};
use compile::{compile, multipliers_to_matrices, CompileOutcome, Compiled, SparseHerm};
use ipm::{IpmExit, IpmSettings};

pub const DEFAULT_GAP_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Smallest accepted relative gap tolerance.
pub const MIN_GAP_TOL: f64 = 1e-9;
/// Minimum violation for a Farkas witness to count.
pub const FARKAS_THRESHOLD: f64 = 1e-8;

fn primal_from_state(program: &LmiProgram, x: Vec<CMatrix>, w: Vec<f64>) -> PrimalValues {
    debug_assert_eq!(x.len(), program.psd_blocks.len());
    PrimalValues { blocks: x, scalars: w }
}

fn zero_primal(program: &LmiProgram) -> PrimalValues {
    PrimalValues {
        blocks: program.psd_blocks.iter().map(|b| CMatrix::zeros(b.dim, b.dim)).collect(),
        scalars: vec![0.0; program.scalar_vars.len()],
    }
}

fn infeasible(program: &LmiProgram, multipliers: Vec<CMatrix>, iterations: usize, note: &str) -> SdpSolution {
    let check = program.farkas_check(&multipliers);
    SdpSolution {
        status: SdpStatus::Infeasible,
        primal_values: zero_primal(program),
        dual_certificate: DualCertificate {
            multipliers,
            slacks: program.psd_blocks.iter().map(|b| CMatrix::zeros(b.dim, b.dim)).collect(),
        },
        primal_objective: f64::INFINITY,
        dual_objective: f64::INFINITY,
        duality_gap: 0.0,
        iterations,
        diagnostic: Some(format!("{note}; separating value {:e}", check.rhs_value)),
    }
}

/// Phase-one program `min τ` s.t. `A(X) + Bw + τ·r₀ = b`, `τ ≥ 0`, with
/// `r₀ = b − A(I)`. Its dual optimum is a Farkas witness whenever `τ* > 0`.
fn phase_one(p: &Compiled) -> Compiled {
    let mut q = p.clone();
    let tau = q.block_dims.len();
    q.block_dims.push(1);
    for row in q.rows.iter_mut() {
        let identity_value: f64 = row
            .blocks
            .iter()
            .map(|(_, a)| a.entries.iter().filter(|e| e.0 == e.1).map(|e| e.2.re).sum::<f64>())
            .sum();
        let r0 = row.rhs - identity_value;
        if r0 != 0.0 {
            row.blocks.push((tau, SparseHerm { entries: vec![(0, 0, C64::new(r0, 0.0))] }));
        }
    }
    q.cost_blocks = q.block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
    q.cost_blocks[tau] = CMatrix::identity(1);
    q.cost_scalars = vec![0.0; q.n_scalars];
    q
}

/// Solves `p` to relative duality gap `gap_tol` within `max_iter` iterations.
///
/// Deterministic: identical inputs give bitwise-identical results.
pub fn solve(p: &LmiProgram, gap_tol: f64, max_iter: usize) -> Result<SdpSolution> {
    if !(gap_tol >= MIN_GAP_TOL) || !gap_tol.is_finite() {
        return Err(Error::InvalidArgument(format!("gap tolerance {gap_tol:e} below {MIN_GAP_TOL:e}")));
    }
    let compiled = match compile(p)? {
        CompileOutcome::Ready(c) => c,
        CompileOutcome::Inconsistent { rows, witness } => {
            let multipliers = multipliers_to_matrices(p, &rows, &witness);
            return Ok(infeasible(p, multipliers, 0, "constraints are linearly inconsistent"));
        }
    };
    let origins: Vec<_> = compiled.rows.iter().map(|r| r.origin).collect();
    let settings = IpmSettings { gap_tol, feas_tol: gap_tol, max_iter };
    let out = ipm::run(&compiled, settings);

    match out.exit {
        IpmExit::Converged => {
            let dual = DualCertificate {
                multipliers: multipliers_to_matrices(p, &origins, &out.state.y),
                slacks: out.state.s,
            };
            Ok(SdpSolution {
                status: SdpStatus::Optimal,
                primal_values: primal_from_state(p, out.state.x, out.state.w),
                dual_certificate: dual,
                primal_objective: out.primal_objective,
                dual_objective: out.dual_objective,
                duality_gap: out.rel_gap,
                iterations: out.iterations,
                diagnostic: None,
            })
        }
        IpmExit::DualRay => {
            let multipliers = multipliers_to_matrices(p, &origins, &out.state.y);
            if p.farkas_check(&multipliers).separates(FARKAS_THRESHOLD) {
                return Ok(infeasible(p, multipliers, out.iterations, "improving dual ray"));
            }
            classify_failure(p, &compiled, &origins, out, settings)
        }
        IpmExit::Unbounded => Ok(SdpSolution {
            status: SdpStatus::MaxIterations,
            primal_values: primal_from_state(p, out.state.x, out.state.w),
            dual_certificate: DualCertificate {
                multipliers: multipliers_to_matrices(p, &origins, &out.state.y),
                slacks: out.state.s,
            },
            primal_objective: out.primal_objective,
            dual_objective: out.dual_objective,
            duality_gap: out.rel_gap,
            iterations: out.iterations,
            diagnostic: Some("objective appears unbounded below".into()),
        }),
        IpmExit::MaxIterations | IpmExit::Stalled => classify_failure(p, &compiled, &origins, out, settings),
    }
}

/// Runs the phase-one program to tell infeasibility from plain non-convergence.
fn classify_failure(
    p: &LmiProgram,
    compiled: &Compiled,
    origins: &[compile::RowOrigin],
    out: ipm::IpmOutcome,
    settings: IpmSettings,
) -> Result<SdpSolution> {
    let aux = phase_one(compiled);
    let phase = ipm::run(&aux, IpmSettings { max_iter: settings.max_iter.max(100), ..settings });
    let tau = phase.state.x.last().map(|t| t[(0, 0)].re).unwrap_or(0.0);
    if phase.exit == IpmExit::Converged && phase.dual_objective > FARKAS_THRESHOLD {
        let multipliers = multipliers_to_matrices(p, origins, &phase.state.y);
        if p.farkas_check(&multipliers).separates(FARKAS_THRESHOLD) {
            return Ok(infeasible(p, multipliers, out.iterations + phase.iterations, "phase-one certificate"));
        }
    }
    let note = match out.exit {
        IpmExit::Stalled => "interior point iteration stalled",
        _ => "iteration limit reached",
    };
    Ok(SdpSolution {
        status: SdpStatus::MaxIterations,
        primal_values: primal_from_state(p, out.state.x, out.state.w),
        dual_certificate: DualCertificate {
            multipliers: multipliers_to_matrices(p, origins, &out.state.y),
            slacks: out.state.s,
        },
        primal_objective: out.primal_objective,
        dual_objective: out.dual_objective,
        duality_gap: out.rel_gap,
        iterations: out.iterations,
        diagnostic: Some(format!("{note}; phase-one infeasibility measure {tau:e}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{c, psd_check};

    fn one() -> CMatrix {
        CMatrix::identity(1)
    }

    #[test]
    fn scalar_lower_bound_zero() {
        // minimize t subject to t·I₁ ⪰ 0.
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 1);
        let t = p.add_scalar("t");
        p.add_constraint("x = t", vec![Term::whole(x, 1, c(1.0, 0.0)), Term::scalar(t, one().scale_real(-1.0))], CMatrix::zeros(1, 1), true);
        p.minimize_scalar(t, 1.0);
        let sol = solve(&p, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.primal_values.scalar(t).abs() < 1e-8);
    }

    fn two_by_two_program() -> (LmiProgram, ScalarId) {
        // minimize t subject to [[t, 1], [1, t]] ⪰ 0.
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 2);
        let t = p.add_scalar("t");
        p.add_constraint(
            "diag",
            vec![Term::whole(x, 2, c(1.0, 0.0)), Term::scalar(t, CMatrix::identity(2).scale_real(-1.0))],
            CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
            true,
        );
        p.minimize_scalar(t, 1.0);
        (p, t)
    }

    #[test]
    fn two_by_two_eigenvalue_bound() {
        let (p, t) = two_by_two_program();
        let sol = solve(&p, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        // The eigenvalues t ± 1 must be nonnegative.
        assert!((sol.primal_values.scalar(t) - 1.0).abs() < 1e-8, "{}", sol.primal_values.scalar(t));
        assert!(sol.primal_objective >= sol.dual_objective - 1e-9 * (1.0 + sol.primal_objective.abs()) * 3.0);
        assert!(sol.duality_gap <= 1e-9);
        for blk in &sol.primal_values.blocks {
            assert!(psd_check(blk, 1e-8).unwrap());
        }
        assert!(p.max_violation(&sol.primal_values) < 1e-7);
    }

    #[test]
    fn deterministic_runs() {
        let (p, _) = two_by_two_program();
        let a = solve(&p, 1e-8, 200).unwrap();
        let b = solve(&p, 1e-8, 200).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_tiny_gap_tolerance() {
        let (p, _) = two_by_two_program();
        assert!(matches!(solve(&p, 1e-12, 200), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cone_infeasibility_has_farkas_witness() {
        // X ⪰ 0 with X = -1.
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 1);
        p.add_constraint("neg", vec![Term::whole(x, 1, c(1.0, 0.0))], one().scale_real(-1.0), true);
        let sol = solve(&p, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        let check = p.farkas_check(&sol.dual_certificate.multipliers);
        assert!(check.separates(FARKAS_THRESHOLD), "{check:?}");
    }

    #[test]
    fn psd_infeasibility_in_matrix_block() {
        // [[1, 2], [2, 1]] is not PSD.
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 2);
        p.add_constraint(
            "fix",
            vec![Term::whole(x, 2, c(1.0, 0.0))],
            CMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 1.0]]),
            true,
        );
        let sol = solve(&p, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        assert!(p.farkas_check(&sol.dual_certificate.multipliers).separates(FARKAS_THRESHOLD));
    }

    #[test]
    fn linear_inconsistency_detected_before_solving() {
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 1);
        p.add_constraint("a", vec![Term::whole(x, 1, c(1.0, 0.0))], one(), true);
        p.add_constraint("b", vec![Term::whole(x, 1, c(1.0, 0.0))], one().scale_real(2.0), true);
        let sol = solve(&p, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        assert_eq!(sol.iterations, 0);
        assert!(p.farkas_check(&sol.dual_certificate.multipliers).separates(FARKAS_THRESHOLD));
    }

    #[test]
    fn consistent_duplicates_are_dropped() {
        let (mut p, t) = two_by_two_program();
        let x = BlockId(0);
        p.add_constraint("dup", vec![Term::sub_block(x, 2, 0, 1, 1, 1, c(1.0, 0.0))], one(), false);
        let sol = solve(&p, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_values.scalar(t) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nearly_dependent_rows_are_ill_posed() {
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 2);
        p.add_constraint("a", vec![Term::sub_block(x, 2, 0, 1, 0, 1, c(1.0, 0.0))], one(), true);
        p.add_constraint(
            "b",
            vec![Term::sub_block(x, 2, 0, 1, 0, 1, c(1.0, 0.0)), Term::sub_block(x, 2, 1, 1, 1, 1, c(1e-9, 0.0))],
            one(),
            true,
        );
        assert!(matches!(solve(&p, 1e-8, 200), Err(Error::IllPosed(_))));
    }

    #[test]
    fn unbounded_objective_reports_max_iterations() {
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 1);
        let t = p.add_scalar("t");
        p.add_constraint("x = t", vec![Term::whole(x, 1, c(1.0, 0.0)), Term::scalar(t, one().scale_real(-1.0))], CMatrix::zeros(1, 1), true);
        p.minimize_scalar(t, -1.0);
        let sol = solve(&p, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::MaxIterations);
        assert!(sol.diagnostic.is_some());
    }

    #[test]
    fn undeclared_variables_rejected() {
        let mut p = LmiProgram::new();
        p.add_block("x", 1);
        p.add_constraint("bad", vec![Term::whole(BlockId(3), 1, c(1.0, 0.0))], one(), true);
        assert!(solve(&p, 1e-8, 200).unwrap_err().is_input_error());
    }

    #[test]
    fn complex_hermitian_block() {
        // minimize Re tr(C X) with tr X = 1 gives the smallest eigenvalue of C.
        let cmat = CMatrix::from_rows(&[&[c(2.0, 0.0), c(0.0, 1.0)], &[c(0.0, -1.0), c(2.0, 0.0)]]);
        let mut p = LmiProgram::new();
        let x = p.add_block("x", 2);
        let ones = CMatrix::from_real_rows(&[&[1.0, 0.0]]);
        let trace_terms = vec![
            Term::block(x, ones.clone(), ones.transpose()),
            Term::block(x, CMatrix::from_real_rows(&[&[0.0, 1.0]]), CMatrix::from_real_rows(&[&[0.0], &[1.0]])),
        ];
        p.add_constraint("trace", trace_terms, one(), true);
        p.minimize_block(x, cmat);
        let sol = solve(&p, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-8, "{}", sol.primal_objective);
    }
}
