//! Tensor-norm engines.
//!
//! [`dec_norm`] solves the factorization program and returns an explicit
//! factorization as an upper-bound certificate; [`unitary_sup`] searches
//! unitary tuples for a lower-bound witness. [`min_norm_estimate`] runs both.
//! [`haagerup_upper`] and [`haagerup_rep_lower`] do the same for elements of
//! a tensor product of two matrix algebras.

mod haagerup;
mod types;
mod unitary;

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;
use serde::{Deserialize, Serialize};

pub use haagerup::{haagerup_rep_lower, haagerup_upper, operator_schmidt, HaagerupLower};
pub use types::{FactorizationCertificate, HTensorElement, NormEstimate, OperatorTuple, TraceRecord, UnitaryWitness};
pub use unitary::{
    check_witness, default_schedule, tensor_sum, unitary_sup, unitary_sup_with, AscentMethod, SupConfig, SupResult,
    DEFAULT_MAX_ASCENT, DEFAULT_RESTARTS, SMOOTHING,
};

use crate::error::{Error, Result};
use crate::matkit::{herm_eig_unchecked, op_norm_unchecked, CMatrix, C64};
use crate::sdp::{assemble_dec_program, solve, SdpStatus};

/// Relative regularization of the factor square roots.
pub const FACTOR_EPS: f64 = 1e-8;
/// Certificates with residual above this (times `max(1, ‖x‖)`) are invalid.
pub const RESIDUAL_TOL: f64 = 1e-7;

fn check_family(a: &[CMatrix], b: &[CMatrix]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension(format!("families of sizes {} and {}", a.len(), b.len())));
    }
    let (rows, inner) = a[0].shape();
    let cols = b[0].cols();
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.shape() != (rows, inner) || y.shape() != (inner, cols) {
            return Err(Error::Dimension(format!("pair {i} has mismatched shapes")));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    Ok(())
}

fn row_col_norms(a: &[CMatrix], b: &[CMatrix]) -> (f64, f64) {
    let mut aa = CMatrix::zeros(a[0].rows(), a[0].rows());
    let mut bb = CMatrix::zeros(b[0].cols(), b[0].cols());
    for (x, y) in a.iter().zip(b) {
        aa = &aa + &x.mul_adjoint(x);
        bb = &bb + &y.adjoint_mul(y);
    }
    (op_norm_unchecked(&aa), op_norm_unchecked(&bb))
}

/// `‖Σ a_i a_i*‖^{1/2} ‖Σ b_i* b_i‖^{1/2}`, an upper bound for `‖Σ a_i b_i‖`.
pub fn cauchy_schwarz_bound(a: &[CMatrix], b: &[CMatrix]) -> Result<f64> {
    check_family(a, b)?;
    let (na, nb) = row_col_norms(a, b);
    Ok(na.sqrt() * nb.sqrt())
}

/// Recomputed value of a factorization certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCheck {
    pub value: f64,
    pub residual: f64,
    pub valid: bool,
}

/// Recomputes value and residual of `cert` against `t` from scratch.
pub fn factorization_value(t: &OperatorTuple, cert: &FactorizationCertificate) -> Result<FactorizationCheck> {
    if cert.a.len() != t.len() {
        return Err(Error::Dimension(format!("certificate has {} factors for {} items", cert.a.len(), t.len())));
    }
    check_family(&cert.a, &cert.b)?;
    if cert.a[0].rows() != t.k() || cert.b[0].cols() != t.k() {
        return Err(Error::Dimension("certificate factors do not match the item dimension".into()));
    }
    let (na, nb) = row_col_norms(&cert.a, &cert.b);
    let residual = cert
        .a
        .iter()
        .zip(&cert.b)
        .zip(t.items())
        .map(|((a, b), x)| op_norm_unchecked(&(&a.matmul(b) - x)))
        .fold(0.0, f64::max);
    let scale = t.max_item_norm().max(1.0);
    Ok(FactorizationCheck { value: na.sqrt() * nb.sqrt(), residual, valid: residual <= RESIDUAL_TOL * scale })
}

/// Factorization (dec) norm `inf ‖Σ a_i a_i*‖^{1/2} ‖Σ b_i* b_i‖^{1/2}` over
/// `x_i = a_i b_i`, with a recovered factorization.
///
/// The tuple is rescaled to unit size before solving. The factors are
/// `a_i = (z_i + εI)^{1/2}` and `b_i = a_i⁻¹ x_i` with `ε = 1e-8·λ`, where
/// `[[y_i, x_i*], [x_i, z_i]]` are the optimal blocks.
pub fn dec_norm(t: &OperatorTuple, gap_tol: f64) -> Result<(f64, FactorizationCertificate)> {
    dec_norm_with(t, gap_tol, crate::sdp::DEFAULT_MAX_ITER)
}

pub fn dec_norm_with(t: &OperatorTuple, gap_tol: f64, max_iter: usize) -> Result<(f64, FactorizationCertificate)> {
    let k = t.k();
    let scale = t.max_item_norm();
    if scale == 0.0 {
        let zero = CMatrix::zeros(k, k);
        let cert = FactorizationCertificate { a: alloc::vec![zero.clone(); t.len()], b: alloc::vec![zero; t.len()], value: 0.0, residual: 0.0 };
        return Ok((0.0, cert));
    }
    let unit = t.scaled(C64::new(1.0 / scale, 0.0));
    let program = assemble_dec_program(&unit);
    let sol = solve(&program, gap_tol, max_iter)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver(format!(
            "factorization program ended with status {:?} after {} iterations (gap {:e}): {}",
            sol.status,
            sol.iterations,
            sol.duality_gap,
            sol.diagnostic.unwrap_or_default()
        )));
    }
    let lambda = sol.primal_objective;
    let eps = FACTOR_EPS * lambda.max(f64::MIN_POSITIVE);
    let mut a = Vec::with_capacity(t.len());
    let mut b = Vec::with_capacity(t.len());
    for (i, x) in t.items().iter().enumerate() {
        let block = sol.primal_values.block(program.block_by_name(&format!("t{i}")).expect("declared block"));
        let z = block.sub_matrix(k, k, k, k).hermitian_part();
        let eig = herm_eig_unchecked(&z);
        let ai = eig.map_spectrum(|l| (l.max(0.0) + eps).sqrt());
        let ai_inv = eig.map_spectrum(|l| 1.0 / (l.max(0.0) + eps).sqrt());
        // Undo the normalization on the right factor only.
        b.push(ai_inv.matmul(x));
        a.push(ai);
    }
    // Balance the two sides so the certificate is scale-free.
    let (na, nb) = row_col_norms(&a, &b);
    if na > 0.0 && nb > 0.0 {
        let s = (nb / na).sqrt().sqrt();
        for ai in a.iter_mut() {
            *ai = ai.scale_real(s);
        }
        for bi in b.iter_mut() {
            *bi = bi.scale_real(1.0 / s);
        }
    }
    let mut cert = FactorizationCertificate { a, b, value: 0.0, residual: 0.0 };
    let check = factorization_value(t, &cert)?;
    cert.value = check.value;
    cert.residual = check.residual;
    Ok((lambda * scale, cert))
}

/// Clears the unit index: the unit coefficient is replaced by a free unitary.
pub fn gauge_reduce(t: &OperatorTuple) -> Result<OperatorTuple> {
    if t.unit_index().is_none() {
        return Err(Error::InvalidArgument("tuple has no unit coefficient to absorb".into()));
    }
    OperatorTuple::new(t.items().to_vec(), None)
}

/// Settings for [`min_norm_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub gap_tol: f64,
    pub sdp_max_iter: usize,
    pub sup: SupConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig { gap_tol: 1e-9, sdp_max_iter: crate::sdp::DEFAULT_MAX_ITER, sup: SupConfig::default() }
    }
}

/// Allowed excess of the lower bound over the upper bound.
pub const SANDWICH_TOL: f64 = 1e-6;

/// Brackets the min-norm of `t` between a unitary witness and a factorization.
pub fn min_norm_estimate(t: &OperatorTuple, cfg: &EstimateConfig) -> Result<NormEstimate> {
    let (upper, upper_cert) = dec_norm_with(t, cfg.gap_tol, cfg.sdp_max_iter)?;
    let sup = unitary_sup_with(t, &cfg.sup)?;
    if sup.value > upper + SANDWICH_TOL * upper.max(1.0) {
        return Err(Error::Solver(format!(
            "lower bound {:.12} exceeds upper bound {:.12}; the factorization program was not solved accurately",
            sup.value, upper
        )));
    }
    Ok(NormEstimate {
        lower: sup.value,
        upper,
        gap: upper - sup.value,
        upper_cert,
        lower_cert: sup.witness,
        trace: sup.trace,
    })
}
