//! Lower-bound engine: maximize `‖Σ u_i ⊗ x_i‖` over tuples of unitaries.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::types::{OperatorTuple, TraceRecord, UnitaryWitness};
use crate::error::{Error, Result};
use crate::matkit::{
    haar_unitary, kron, lu_solve_complex, normalize, op_norm_unchecked, polar_unitary, random_unit_vector, svd,
    CMatrix, C64, MAX_KRON_DIM,
};
use crate::seed::derive;

pub const DEFAULT_RESTARTS: usize = 32;
pub const DEFAULT_MAX_ASCENT: usize = 500;
/// Width of the soft-max between the top two singular values.
pub const SMOOTHING: f64 = 1e-6;

/// How each restart climbs from its Haar-random start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AscentMethod {
    /// Exact block maximization over the singular vectors and each unitary
    /// in turn, followed by a short Riemannian polish.
    Alternating,
    /// Riemannian gradient ascent with Cayley retraction and Armijo
    /// backtracking on the smoothed top singular value.
    Cayley,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupConfig {
    /// Unitary dimensions to search, in order. Empty means `(1, k, 2k)`, or
    /// just `1` for a single item.
    pub schedule: Vec<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub method: AscentMethod,
    pub seed: u64,
}

impl Default for SupConfig {
    fn default() -> Self {
        SupConfig {
            schedule: Vec::new(),
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ASCENT,
            method: AscentMethod::Alternating,
            seed: 0,
        }
    }
}

/// Default dimension schedule `(1, k, 2k)` without repeats.
pub fn default_schedule(k: usize) -> Vec<usize> {
    let mut s = vec![1, k, 2 * k];
    s.dedup();
    s
}

/// Result of a supremum search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub value: f64,
    pub witness: UnitaryWitness,
    pub trace: Vec<TraceRecord>,
}

/// `Σ u_i ⊗ x_i`.
pub fn tensor_sum(unitaries: &[CMatrix], items: &[CMatrix]) -> CMatrix {
    let d = unitaries[0].rows();
    let k = items[0].rows();
    let mut m = CMatrix::zeros(d * k, d * k);
    for (u, x) in unitaries.iter().zip(items) {
        m = &m + &kron(u, x);
    }
    m
}

/// Reshapes a vector indexed `a·k + p` into the `d×k` matrix with entry `(a, p)`.
fn reshape(v: &[C64], d: usize, k: usize) -> CMatrix {
    CMatrix::new(d, k, v.to_vec()).expect("length d·k")
}

/// `(u ⊗ x) v` through the reshaped form `u · V · xᵀ`.
fn apply(unitaries: &[CMatrix], items: &[CMatrix], h: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(h.rows(), h.cols());
    for (u, x) in unitaries.iter().zip(items) {
        out = &out + &u.matmul(h).matmul(&x.transpose());
    }
    out
}

/// `(u* ⊗ x*) v` in reshaped form `u* · V · conj(x)`.
fn apply_adjoint(unitaries: &[CMatrix], items: &[CMatrix], xi: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(xi.rows(), xi.cols());
    for (u, x) in unitaries.iter().zip(items) {
        out = &out + &u.adjoint_mul(xi).matmul(&x.conj());
    }
    out
}

fn unit_matrix(m: &CMatrix) -> (CMatrix, f64) {
    let mut v = m.clone().into_vec();
    let n = normalize(&mut v);
    (CMatrix::new(m.rows(), m.cols(), v).expect("shape"), n)
}

/// Euclidean gradient of `Re ξ*(Σ u_i ⊗ x_i)η` with respect to `u_i`.
fn gradient(xi: &CMatrix, x: &CMatrix, eta: &CMatrix) -> CMatrix {
    xi.matmul(&x.conj()).mul_adjoint(eta)
}

/// Alternating maximization of `Re ξ*(Σ u_i ⊗ x_i)η` over `ξ`, `η` and each `u_i`.
/// Every step is an exact maximization, so the bilinear value never decreases.
fn alternating(unitaries: &mut [CMatrix], items: &[CMatrix], pinned: Option<usize>, eta0: &[C64], max_iter: usize) {
    let d = unitaries[0].rows();
    let k = items[0].rows();
    let mut eta = reshape(eta0, d, k);
    let mut last = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let (xi, _) = unit_matrix(&apply(unitaries, items, &eta));
        let (e, _) = unit_matrix(&apply_adjoint(unitaries, items, &xi));
        eta = e;
        for (i, (u, x)) in unitaries.iter_mut().zip(items).enumerate() {
            if Some(i) != pinned {
                *u = polar_unitary(&gradient(&xi, x, &eta));
            }
        }
        let value = apply(unitaries, items, &eta).as_slice().iter().zip(xi.as_slice()).map(|(a, b)| b.conj() * a).sum::<C64>().re;
        if value - last <= 1e-13 * value.abs().max(1e-300) {
            break;
        }
        last = value;
    }
}

/// Smoothed top singular value and its Euclidean gradient per unitary.
fn smoothed(unitaries: &[CMatrix], items: &[CMatrix]) -> (f64, Vec<CMatrix>) {
    let d = unitaries[0].rows();
    let k = items[0].rows();
    let s = svd(&tensor_sum(unitaries, items));
    let s1 = s.singular_values[0];
    let s2 = s.singular_values.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    let z = ((s2 - s1) / SMOOTHING).exp();
    let value = s1 + SMOOTHING * z.ln_1p();
    let w1 = 1.0 / (1.0 + z);
    let mut grads: Vec<CMatrix> = unitaries.iter().map(|u| CMatrix::zeros(u.rows(), u.cols())).collect();
    for (j, w) in [(0usize, w1), (1usize, 1.0 - w1)] {
        if w < 1e-300 || j >= s.singular_values.len() {
            continue;
        }
        let xi = reshape(&s.u.col_vec(j), d, k);
        let eta = reshape(&s.v.col_vec(j), d, k);
        for (g, x) in grads.iter_mut().zip(items) {
            g.axpy(C64::new(w, 0.0), &gradient(&xi, x, &eta));
        }
    }
    (value, grads)
}

/// Cayley retraction `(I − τW/2)⁻¹ (I + τW/2) u`.
fn cayley(w: &CMatrix, u: &CMatrix, tau: f64) -> CMatrix {
    let n = u.rows();
    let half = w.scale_real(0.5 * tau);
    let lhs = &CMatrix::identity(n) - &half;
    let rhs = (&CMatrix::identity(n) + &half).matmul(u);
    lu_solve_complex(&lhs, &rhs).unwrap_or_else(|_| u.clone())
}

fn riemannian_ascent(unitaries: &mut [CMatrix], items: &[CMatrix], pinned: Option<usize>, max_iter: usize) {
    let (mut value, mut grads) = smoothed(unitaries, items);
    let mut tau = 1.0;
    for _ in 0..max_iter {
        let dirs: Vec<CMatrix> = unitaries
            .iter()
            .zip(&grads)
            .enumerate()
            .map(|(i, (u, g))| {
                if Some(i) == pinned {
                    CMatrix::zeros(u.rows(), u.cols())
                } else {
                    &g.mul_adjoint(u) - &u.mul_adjoint(g)
                }
            })
            .collect();
        let slope: f64 = dirs.iter().map(|w| 0.5 * w.frobenius().powi(2)).sum();
        if slope.sqrt() <= 1e-12 * value.max(1e-300) {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<CMatrix> = unitaries.iter().zip(&dirs).map(|(u, w)| cayley(w, u, tau)).collect();
            let (v, g) = smoothed(&trial, items);
            if v >= value + 1e-4 * tau * slope {
                let gain = v - value;
                unitaries.clone_from_slice(&trial);
                value = v;
                grads = g;
                accepted = true;
                tau *= 2.0;
                if gain <= 1e-14 * value {
                    return;
                }
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
    }
}

struct Restart {
    value: f64,
    unitaries: Vec<CMatrix>,
    vector: Vec<C64>,
}

fn run_restart(t: &OperatorTuple, d: usize, seed: u64, cfg: &SupConfig) -> Restart {
    let n = t.len();
    let pinned = t.unit_index();
    let mut unitaries: Vec<CMatrix> = (0..n)
        .map(|i| {
            if Some(i) == pinned {
                CMatrix::identity(d)
            } else {
                haar_unitary(d, derive(seed, &[i as u64])).expect("d ≥ 1")
            }
        })
        .collect();
    match cfg.method {
        AscentMethod::Alternating => {
            let eta0 = random_unit_vector(d * t.k(), derive(seed, &[n as u64]));
            alternating(&mut unitaries, t.items(), pinned, &eta0, cfg.max_iter);
            riemannian_ascent(&mut unitaries, t.items(), pinned, 10.min(cfg.max_iter));
        }
        AscentMethod::Cayley => riemannian_ascent(&mut unitaries, t.items(), pinned, cfg.max_iter),
    }
    // Clean up rounding drift before certifying.
    for (i, u) in unitaries.iter_mut().enumerate() {
        if Some(i) != pinned {
            *u = polar_unitary(u);
        }
    }
    let m = tensor_sum(&unitaries, t.items());
    let s = svd(&m);
    let vector = s.v.col_vec(0);
    let value = crate::matkit::vec_norm(&m.matvec(&vector));
    Restart { value, unitaries, vector }
}

/// Searches `sup ‖Σ u_i ⊗ x_i‖` over `d×d` unitaries for each `d` in the schedule.
///
/// Restart `r` at dimension `d` draws its randomness from
/// `derive(seed, [d, r])`, so the result does not depend on thread count.
/// The trace records the running best value after each dimension.
pub fn unitary_sup_with(t: &OperatorTuple, cfg: &SupConfig) -> Result<SupResult> {
    let schedule = match (cfg.schedule.is_empty(), t.len()) {
        // A single item has the same norm against every unitary.
        (true, 1) => vec![1],
        (true, _) => default_schedule(t.k()),
        (false, _) => cfg.schedule.clone(),
    };
    if cfg.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    for &d in &schedule {
        if d == 0 || d * t.k() > MAX_KRON_DIM {
            return Err(Error::InvalidArgument(format!("schedule dimension {d} outside the supported range")));
        }
    }
    let mut best: Option<(f64, UnitaryWitness)> = None;
    let mut trace = Vec::with_capacity(schedule.len());
    for &d in &schedule {
        let runs = crate::par::map_indexed(cfg.restarts, |r| run_restart(t, d, derive(cfg.seed, &[d as u64, r as u64]), cfg));
        for run in runs {
            if best.as_ref().map_or(true, |(v, _)| run.value > *v) {
                best = Some((run.value, UnitaryWitness { d, unitaries: run.unitaries, vector: run.vector, value: run.value }));
            }
        }
        trace.push(TraceRecord { dimension: d, restarts: cfg.restarts, best_value: best.as_ref().map_or(0.0, |b| b.0) });
    }
    let (value, witness) = best.expect("schedule is nonempty");
    Ok(SupResult { value, witness, trace })
}

/// [`unitary_sup_with`] using the default ascent settings.
pub fn unitary_sup(t: &OperatorTuple, schedule: &[usize], restarts: usize, seed: u64) -> Result<SupResult> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("schedule must not be empty".into()));
    }
    unitary_sup_with(t, &SupConfig { schedule: schedule.to_vec(), restarts, seed, ..SupConfig::default() })
}

/// Recomputes a witness value from scratch; `None` if it does not verify.
pub fn check_witness(t: &OperatorTuple, w: &UnitaryWitness) -> Option<f64> {
    if w.unitaries.len() != t.len() || w.vector.len() != w.d * t.k() {
        return None;
    }
    if w.unitaries.iter().any(|u| u.shape() != (w.d, w.d) || u.unitarity_residual() > 1e-8) {
        return None;
    }
    if let Some(i) = t.unit_index() {
        if (&w.unitaries[i] - &CMatrix::identity(w.d)).max_abs() > 1e-12 {
            return None;
        }
    }
    if (crate::matkit::vec_norm(&w.vector) - 1.0).abs() > 1e-10 {
        return None;
    }
    let m = tensor_sum(&w.unitaries, t.items());
    let value = crate::matkit::vec_norm(&m.matvec(&w.vector));
    (value <= op_norm_unchecked(&m) + 1e-9).then_some(value)
}
