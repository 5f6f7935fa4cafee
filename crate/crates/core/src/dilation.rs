//! Completely positive extension of unital maps on unitary spans, Stinespring
//! factorization, and the check that unitary images force multiplicativity.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{herm_eig_unchecked, CMatrix, C64, MAX_FACTOR_DIM};

/// Unitaries must satisfy `‖U*U − I‖ ≤` this.
pub const UNITARY_TOL: f64 = 1e-10;
/// Spans whose Gram matrix condition number exceeds this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e10;

/// The span of a family of unitaries in `M_k`, optionally with the unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpan")]
pub struct SpanSpec {
    k: usize,
    unitaries: Vec<CMatrix>,
    include_unit: bool,
}

#[derive(Deserialize)]
struct RawSpan {
    unitaries: Vec<CMatrix>,
    include_unit: bool,
}

impl TryFrom<RawSpan> for SpanSpec {
    type Error = Error;

    fn try_from(raw: RawSpan) -> Result<Self> {
        SpanSpec::new(raw.unitaries, raw.include_unit)
    }
}

impl SpanSpec {
    pub fn new(unitaries: Vec<CMatrix>, include_unit: bool) -> Result<Self> {
        let first = unitaries.first().ok_or_else(|| Error::InvalidArgument("span needs at least one unitary".into()))?;
        let k = first.rows();
        if k == 0 || k > MAX_FACTOR_DIM {
            return Err(Error::Dimension(format!("span dimension {k} outside 1..={MAX_FACTOR_DIM}")));
        }
        for (i, u) in unitaries.iter().enumerate() {
            if u.shape() != (k, k) {
                return Err(Error::Dimension(format!("unitary {i} is not {k}×{k}")));
            }
            if !u.is_finite() {
                return Err(Error::NonFinite);
            }
            let residual = u.unitarity_residual();
            if residual > UNITARY_TOL {
                return Err(Error::NotUnitary { residual });
            }
        }
        let mut spanning: Vec<&CMatrix> = unitaries.iter().collect();
        let identity = CMatrix::identity(k);
        if include_unit {
            spanning.push(&identity);
        }
        let n = spanning.len();
        let gram = CMatrix::from_fn(n, n, |p, q| {
            spanning[p].as_slice().iter().zip(spanning[q].as_slice()).map(|(a, b)| a.conj() * b).sum::<C64>()
        });
        let eig = herm_eig_unchecked(&gram);
        let (lo, hi) = (eig.eigenvalues[0], eig.eigenvalues[n - 1]);
        if !(lo > 0.0) || hi / lo > MAX_GRAM_CONDITION {
            return Err(Error::IllPosed(format!(
                "span generators are linearly dependent (Gram condition {:e})",
                if lo > 0.0 { hi / lo } else { f64::INFINITY }
            )));
        }
        Ok(SpanSpec { k, unitaries, include_unit })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.unitaries
    }

    pub fn include_unit(&self) -> bool {
        self.include_unit
    }
}

/// Prescribed images `T(u_i) ∈ M_m` of the span generators; `T(1) = I_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap")]
pub struct UnitalMapSpec {
    m: usize,
    images: Vec<CMatrix>,
}

#[derive(Deserialize)]
struct RawMap {
    images: Vec<CMatrix>,
}

impl TryFrom<RawMap> for UnitalMapSpec {
    type Error = Error;

    fn try_from(raw: RawMap) -> Result<Self> {
        UnitalMapSpec::new(raw.images)
    }
}

impl UnitalMapSpec {
    pub fn new(images: Vec<CMatrix>) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::InvalidArgument("map needs at least one image".into()))?;
        let m = first.rows();
        if m == 0 || m > MAX_FACTOR_DIM {
            return Err(Error::Dimension(format!("target dimension {m} outside 1..={MAX_FACTOR_DIM}")));
        }
        for (i, t) in images.iter().enumerate() {
            if t.shape() != (m, m) {
                return Err(Error::Dimension(format!("image {i} is not {m}×{m}")));
            }
            if !t.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(UnitalMapSpec { m, images })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn images(&self) -> &[CMatrix] {
        &self.images
    }

    pub fn unit_image(&self) -> CMatrix {
        CMatrix::identity(self.m)
    }
}

pub(crate) fn check_compatible(span: &SpanSpec, target: &UnitalMapSpec) -> Result<()> {
    if span.unitaries.len() != target.images.len() {
        return Err(Error::Dimension(format!(
            "{} generators but {} images",
            span.unitaries.len(),
            target.images.len()
        )));
    }
    if span.k * target.m > crate::matkit::MAX_KRON_DIM {
        return Err(Error::Dimension("Choi matrix would exceed the size cap".into()));
    }
    Ok(())
}

/// Kraus eigenvalues below this fraction of the Choi trace are dropped.
pub const RANK_CUT: f64 = 1e-10;
/// Tolerance for the unital and PSD preconditions of [`stinespring_factor`].
pub const UNITAL_TOL: f64 = 1e-8;
/// Defect threshold for a PASS verdict in [`hom_extension_check`].
pub const DEFECT_TOL: f64 = 1e-6;
/// Reconstruction threshold for a PASS verdict in [`hom_extension_check`].
pub const RECONSTRUCTION_TOL: f64 = 1e-7;
const POLISH_ITERS: usize = 30;

/// Choi matrix `C = Σ e_ij ⊗ Φ(e_ij)` of a linear map `Φ: M_k → M_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChoi")]
pub struct ChoiMatrix {
    k: usize,
    m: usize,
    matrix: CMatrix,
}

#[derive(Deserialize)]
struct RawChoi {
    k: usize,
    m: usize,
    matrix: CMatrix,
}

impl TryFrom<RawChoi> for ChoiMatrix {
    type Error = Error;

    fn try_from(raw: RawChoi) -> Result<Self> {
        ChoiMatrix::new(raw.k, raw.m, raw.matrix)
    }
}

impl ChoiMatrix {
    pub fn new(k: usize, m: usize, matrix: CMatrix) -> Result<Self> {
        if k == 0 || m == 0 || matrix.shape() != (k * m, k * m) {
            return Err(Error::Dimension(format!(
                "Choi matrix is {}×{}, expected {}×{}",
                matrix.rows(),
                matrix.cols(),
                k * m,
                k * m
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(ChoiMatrix { k, m, matrix })
    }

    /// Choi matrix of `x ↦ Σ K_r x K_r*` for `m×k` Kraus operators.
    pub fn from_kraus(k: usize, m: usize, kraus: &[CMatrix]) -> Result<Self> {
        if kraus.iter().any(|kr| kr.shape() != (m, k)) {
            return Err(Error::Dimension(format!("Kraus operators must be {m}×{k}")));
        }
        let mut matrix = CMatrix::zeros(k * m, k * m);
        for kr in kraus {
            let v: Vec<C64> = (0..k * m).map(|idx| kr[(idx % m, idx / m)]).collect();
            for a in 0..k * m {
                for b in 0..k * m {
                    matrix[(a, b)] += v[a] * v[b].conj();
                }
            }
        }
        ChoiMatrix::new(k, m, matrix)
    }

    /// Choi matrix of an arbitrary linear map given by its action.
    pub fn from_map(k: usize, m: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let mut matrix = CMatrix::zeros(k * m, k * m);
        for i in 0..k {
            for j in 0..k {
                let img = f(&CMatrix::unit(k, k, i, j));
                if img.shape() != (m, m) {
                    return Err(Error::Dimension(format!("map output is not {m}×{m}")));
                }
                matrix.set_sub_matrix(i * m, j * m, &img);
            }
        }
        ChoiMatrix::new(k, m, matrix)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        crate::sdp::choi_apply(&self.matrix, self.k, self.m, x)
    }

    /// Kraus operators of the spectral decomposition, eigenvalues below
    /// `RANK_CUT · trace` dropped. Errors when the kept and dropped parts of
    /// the spectrum both sit within a decade of the cut.
    pub fn kraus(&self) -> Result<Vec<CMatrix>> {
        self.truncated_kraus(true)
    }

    fn truncated_kraus(&self, check_gap: bool) -> Result<Vec<CMatrix>> {
        let eig = herm_eig_unchecked(&self.matrix.hermitian_part());
        let trace: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        if trace <= 0.0 {
            return Err(Error::InvalidArgument("Choi matrix has no positive spectrum".into()));
        }
        let cut = RANK_CUT * trace;
        let kept_min = eig.eigenvalues.iter().copied().filter(|&l| l >= cut).fold(f64::INFINITY, f64::min);
        let dropped_max = eig.eigenvalues.iter().copied().filter(|&l| l < cut).fold(0.0, f64::max);
        if check_gap && kept_min < 10.0 * cut && dropped_max > 0.1 * cut {
            return Err(Error::IllPosed(format!(
                "numerical rank unstable: spectral gap {dropped_max:e} .. {kept_min:e} straddles the cut {cut:e}"
            )));
        }
        let (k, m) = (self.k, self.m);
        let mut out = Vec::new();
        for (idx, &l) in eig.eigenvalues.iter().enumerate().rev() {
            if l < cut {
                continue;
            }
            let s = l.sqrt();
            out.push(CMatrix::from_fn(m, k, |p, i| eig.eigenvectors[(i * m + p, idx)] * s));
        }
        Ok(out)
    }
}

/// Dual multipliers proving that no unital CP extension exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    /// One multiplier per constraint: the unit first, then each generator.
    pub multipliers: Vec<CMatrix>,
    /// `Re Σ ⟨Y_j, b_j⟩`, positive for a separating certificate.
    pub separating_value: f64,
    /// Largest eigenvalue of `A*(Y)`, nonpositive up to rounding.
    pub max_block_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CpExtension {
    Feasible { choi: ChoiMatrix, constraint_residual: f64 },
    Infeasible(InfeasibilityCertificate),
}

fn constraint_residual(kraus: &[CMatrix], span: &SpanSpec, target: &UnitalMapSpec) -> f64 {
    let m = target.m;
    let apply = |x: &CMatrix| {
        let mut out = CMatrix::zeros(m, m);
        for kr in kraus {
            out = &out + &kr.matmul(x).mul_adjoint(kr);
        }
        out
    };
    let mut worst = crate::matkit::op_norm_unchecked(&(&apply(&CMatrix::identity(span.k)) - &target.unit_image()));
    for (u, t) in span.unitaries.iter().zip(&target.images) {
        worst = worst.max(crate::matkit::op_norm_unchecked(&(&apply(u) - t)));
    }
    worst
}

/// Gauss–Newton on the Kraus operators so that the unit and generator
/// constraints hold to rounding, keeping the (truncated) rank fixed.
fn polish_kraus(kraus: &mut [CMatrix], span: &SpanSpec, target: &UnitalMapSpec) {
    let (k, m) = (span.k, target.m);
    let identity = CMatrix::identity(k);
    let mut inputs: Vec<&CMatrix> = alloc::vec![&identity];
    inputs.extend(span.unitaries.iter());
    let mut outputs: Vec<CMatrix> = alloc::vec![target.unit_image()];
    outputs.extend(target.images.iter().cloned());
    let unknowns = 2 * kraus.len() * m * k;

    for _ in 0..POLISH_ITERS {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        let mut norm2 = 0.0;
        for (x, t) in inputs.iter().zip(&outputs) {
            let mut f = CMatrix::zeros(m, m);
            for kr in kraus.iter() {
                f = &f + &kr.matmul(x).mul_adjoint(kr);
            }
            let f = &f - t;
            // Columns of the Jacobian for this block, one per real unknown.
            let mut cols: Vec<CMatrix> = Vec::with_capacity(unknowns);
            for kr in kraus.iter() {
                let left = x.mul_adjoint(kr); // x K*, k×m
                let right = kr.matmul(x); // K x, m×k
                for p in 0..m {
                    for j in 0..k {
                        for s in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                            let mut d = CMatrix::zeros(m, m);
                            for q in 0..m {
                                d[(p, q)] += s * left[(j, q)];
                                d[(q, p)] += right[(q, j)] * s.conj();
                            }
                            cols.push(d);
                        }
                    }
                }
            }
            for a in 0..m {
                for b in 0..m {
                    for part in 0..2 {
                        let pick = |z: C64| if part == 0 { z.re } else { z.im };
                        rows.push(cols.iter().map(|d| pick(d[(a, b)])).collect());
                        let v = pick(f[(a, b)]);
                        norm2 += v * v;
                        rhs.push(v);
                    }
                }
            }
        }
        if norm2.sqrt() < 1e-15 {
            break;
        }
        let step = crate::matkit::min_norm_solve(&rows, &rhs, 1e-13);
        let mut idx = 0;
        for kr in kraus.iter_mut() {
            for p in 0..m {
                for j in 0..k {
                    kr[(p, j)] -= C64::new(step[idx], step[idx + 1]);
                    idx += 2;
                }
            }
        }
    }
}

/// Unital CP map `Φ: M_k → M_m` with `Φ(u_i) = T(u_i)`, or a certificate
/// that none exists.
///
/// The Choi matrix from the solver is truncated to its numerical rank and
/// the Kraus operators are refined until the constraints hold to rounding.
pub fn cp_extension(span: &SpanSpec, target: &UnitalMapSpec) -> Result<CpExtension> {
    let program = crate::sdp::assemble_choi_program(span, target)?;
    let sol = crate::sdp::solve(&program, crate::sdp::MIN_GAP_TOL, crate::sdp::DEFAULT_MAX_ITER)?;
    match sol.status {
        crate::sdp::SdpStatus::Optimal => {
            let (k, m) = (span.k, target.m);
            let block = sol.primal_values.block(program.block_by_name("choi").expect("declared block"));
            let raw = ChoiMatrix::new(k, m, block.hermitian_part())?;
            // Interior-point output carries eigenvalue tails near the cut, so
            // truncate unconditionally and let the refinement repair the constraints.
            let mut kraus = raw.truncated_kraus(false)?;
            polish_kraus(&mut kraus, span, target);
            let residual = constraint_residual(&kraus, span, target);
            if residual > RECONSTRUCTION_TOL {
                return Err(Error::Solver(format!(
                    "extension constraints hold only to {residual:e} after refinement ({} iterations, gap {:e})",
                    sol.iterations, sol.duality_gap
                )));
            }
            Ok(CpExtension::Feasible { choi: ChoiMatrix::from_kraus(k, m, &kraus)?, constraint_residual: residual })
        }
        crate::sdp::SdpStatus::Infeasible => {
            let check = program.farkas_check(&sol.dual_certificate.multipliers);
            Ok(CpExtension::Infeasible(InfeasibilityCertificate {
                multipliers: sol.dual_certificate.multipliers,
                separating_value: check.rhs_value,
                max_block_eigenvalue: check.max_block_eigenvalue,
            }))
        }
        status => Err(Error::Solver(format!(
            "extension program ended with status {status:?} after {} iterations (gap {:e}): {}",
            sol.iterations,
            sol.duality_gap,
            sol.diagnostic.unwrap_or_default()
        ))),
    }
}

/// `Φ(x) = S*(x ⊗ I_R)S` with `S` an isometry `C^m → C^k ⊗ C^R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StinespringData {
    pub k: usize,
    /// Number of Kraus operators `R`.
    pub multiplicity: usize,
    /// `k·R`.
    pub dilation_dim: usize,
    /// `dilation_dim × m`, row `i·R + r` holding `conj(K_r[·, i])`.
    pub isometry: CMatrix,
}

impl StinespringData {
    /// `π̂(x) = x ⊗ I_R`.
    pub fn represent(&self, x: &CMatrix) -> CMatrix {
        crate::matkit::kron(x, &CMatrix::identity(self.multiplicity))
    }

    /// `S* π̂(x) S`.
    pub fn compress(&self, x: &CMatrix) -> CMatrix {
        self.isometry.adjoint_mul(&self.represent(x).matmul(&self.isometry))
    }

    /// `π̂(u_i)` for each generator of `span`.
    pub fn rep_images(&self, span: &SpanSpec) -> Vec<CMatrix> {
        span.unitaries.iter().map(|u| self.represent(u)).collect()
    }
}

/// Minimal Stinespring dilation of a unital CP map given by its Choi matrix.
///
/// `dilation_dim = k·rank(C)`, at most `k²m`.
pub fn stinespring_factor(choi: &ChoiMatrix) -> Result<StinespringData> {
    if !crate::matkit::psd_check(choi.matrix(), UNITAL_TOL)? {
        return Err(Error::InvalidArgument("Choi matrix is not positive semidefinite".into()));
    }
    let unit = choi.apply(&CMatrix::identity(choi.k))?;
    let defect = crate::matkit::op_norm_unchecked(&(&unit - &CMatrix::identity(choi.m)));
    if defect > UNITAL_TOL {
        return Err(Error::InvalidArgument(format!("map is not unital (defect {defect:e})")));
    }
    let kraus = choi.kraus()?;
    let (k, m, r) = (choi.k, choi.m, kraus.len());
    let isometry = CMatrix::from_fn(k * r, m, |row, p| kraus[row % r][(p, row / r)].conj());
    Ok(StinespringData { k, multiplicity: r, dilation_dim: k * r, isometry })
}

/// Tolerance on the unitarity of `û` and the isometry property of `S`.
pub const RANGE_INPUT_TOL: f64 = 1e-8;

/// `‖(1 − SS*) û S‖`, zero exactly when `range(S)` is invariant under `û`.
///
/// Its square equals `‖I − (S*ûS)*(S*ûS)‖`.
pub fn range_invariance_defect(u_hat: &CMatrix, s: &CMatrix) -> Result<f64> {
    let d = u_hat.rows();
    if !u_hat.is_square() || s.rows() != d || s.cols() > d || s.cols() == 0 {
        return Err(Error::Dimension(format!(
            "û is {}×{} but S is {}×{}",
            u_hat.rows(),
            u_hat.cols(),
            s.rows(),
            s.cols()
        )));
    }
    if !u_hat.is_finite() || !s.is_finite() {
        return Err(Error::NonFinite);
    }
    let residual = u_hat.unitarity_residual();
    if residual > RANGE_INPUT_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let residual = s.isometry_residual();
    if residual > RANGE_INPUT_TOL {
        return Err(Error::NotIsometry { residual });
    }
    let us = u_hat.matmul(s);
    let inside = s.matmul(&s.adjoint_mul(&us));
    Ok(crate::matkit::op_norm_unchecked(&(&us - &inside)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomVerdict {
    Pass,
    Fail,
    NoCpExtension,
}

/// Measurements taken on a feasible extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionDetails {
    pub dilation_dim: usize,
    pub multiplicity: usize,
    /// `max(‖S*S − I‖, max_i ‖S*π̂(u_i)S − T(u_i)‖)`.
    pub reconstruction_error: f64,
    /// Per generator, the larger of the defects of `π̂(u_i)` and `π̂(u_i)*`.
    pub range_defects: Vec<f64>,
    /// `max ‖T̂(w₁w₂) − T̂(w₁)T̂(w₂)‖` over nonempty words with `|w₁| + |w₂| ≤ 3`.
    pub multiplicativity_defect: f64,
    pub words_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomExtensionReport {
    pub verdict: HomVerdict,
    pub extension: Option<ExtensionDetails>,
    pub certificate: Option<InfeasibilityCertificate>,
}

impl HomExtensionReport {
    pub fn max_range_defect(&self) -> f64 {
        self.extension.as_ref().map_or(0.0, |e| e.range_defects.iter().copied().fold(0.0, f64::max))
    }
}

/// Extends `T` completely positively, dilates, and checks that unitary
/// images force the dilation to reduce on the generators.
pub fn hom_extension_check(span: &SpanSpec, target: &UnitalMapSpec) -> Result<HomExtensionReport> {
    for t in &target.images {
        let residual = t.unitarity_residual();
        if residual > RANGE_INPUT_TOL {
            return Err(Error::NotUnitary { residual });
        }
    }
    let choi = match cp_extension(span, target)? {
        CpExtension::Infeasible(cert) => {
            return Ok(HomExtensionReport { verdict: HomVerdict::NoCpExtension, extension: None, certificate: Some(cert) })
        }
        CpExtension::Feasible { choi, .. } => choi,
    };
    let dil = stinespring_factor(&choi)?;
    let s = &dil.isometry;
    let norm = crate::matkit::op_norm_unchecked;

    let mut reconstruction_error = s.isometry_residual();
    let mut range_defects = Vec::with_capacity(span.unitaries.len());
    for (u, t) in span.unitaries.iter().zip(&target.images) {
        reconstruction_error = reconstruction_error.max(norm(&(&dil.compress(u) - t)));
        let hat = dil.represent(u);
        let d = range_invariance_defect(&hat, s)?.max(range_invariance_defect(&hat.adjoint(), s)?);
        range_defects.push(d);
    }

    let mut letters: Vec<CMatrix> = Vec::new();
    for u in &span.unitaries {
        letters.push(u.clone());
        letters.push(u.adjoint());
    }
    let mut words: Vec<(usize, CMatrix)> = letters.iter().map(|w| (1, w.clone())).collect();
    for a in &letters {
        for b in &letters {
            words.push((2, a.matmul(b)));
        }
    }
    let compressed: Vec<CMatrix> = words.iter().map(|(_, w)| dil.compress(w)).collect();
    let mut multiplicativity_defect: f64 = 0.0;
    let mut words_checked = 0;
    for (i, (li, wi)) in words.iter().enumerate() {
        for (j, (lj, wj)) in words.iter().enumerate() {
            if li + lj > 3 {
                continue;
            }
            let joint = dil.compress(&wi.matmul(wj));
            let split = compressed[i].matmul(&compressed[j]);
            multiplicativity_defect = multiplicativity_defect.max(norm(&(&joint - &split)));
            words_checked += 1;
        }
    }

    let pass = reconstruction_error <= RECONSTRUCTION_TOL
        && range_defects.iter().all(|&d| d <= DEFECT_TOL)
        && multiplicativity_defect <= DEFECT_TOL;
    Ok(HomExtensionReport {
        verdict: if pass { HomVerdict::Pass } else { HomVerdict::Fail },
        extension: Some(ExtensionDetails {
            dilation_dim: dil.dilation_dim,
            multiplicity: dil.multiplicity,
            reconstruction_error,
            range_defects,
            multiplicativity_defect,
            words_checked,
        }),
        certificate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{c, gaussian_matrix, haar_unitary, op_norm, psd_check};
    use alloc::vec;
    use proptest::prelude::*;

    fn z() -> CMatrix {
        CMatrix::diag_real(&[1.0, -1.0])
    }

    fn feasible_choi(span: &SpanSpec, target: &UnitalMapSpec) -> ChoiMatrix {
        match cp_extension(span, target).unwrap() {
            CpExtension::Feasible { choi, constraint_residual } => {
                assert!(constraint_residual < 1e-12, "{constraint_residual:e}");
                choi
            }
            CpExtension::Infeasible(cert) => panic!("unexpectedly infeasible: {cert:?}"),
        }
    }

    #[test]
    fn span_rejects_dependent_generators() {
        let err = SpanSpec::new(vec![CMatrix::identity(2)], true).unwrap_err();
        assert!(matches!(err, Error::IllPosed(_)));
        let err = SpanSpec::new(vec![CMatrix::diag_real(&[1.0, 2.0])], true).unwrap_err();
        assert!(matches!(err, Error::NotUnitary { .. }));
    }

    #[test]
    fn identity_choi_factors_trivially() {
        let choi = ChoiMatrix::from_map(2, 2, |x| x.clone()).unwrap();
        let dil = stinespring_factor(&choi).unwrap();
        assert_eq!(dil.dilation_dim, 2);
        assert_eq!(dil.multiplicity, 1);
        // S is I up to a global phase.
        let s = &dil.isometry;
        let phase = s[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        assert!(op_norm(&(&s.scale(phase.conj()) - &CMatrix::identity(2))).unwrap() < 1e-12);
        assert_eq!(dil.represent(&z()), z());
    }

    #[test]
    fn depolarizing_map_dilation() {
        let (k, m) = (2, 3);
        let choi = ChoiMatrix::from_map(k, m, |x| CMatrix::identity(m).scale(x.trace() / k as f64)).unwrap();
        let dil = stinespring_factor(&choi).unwrap();
        // Rank k·m Choi: one Kraus operator per matrix unit, each a scaled e_pi.
        assert_eq!(dil.multiplicity, k * m);
        assert_eq!(dil.dilation_dim, k * k * m);
        assert!(dil.isometry.isometry_residual() < 1e-12);
        // Each column of S has the same weight on every block of the input space.
        for p in 0..m {
            for i in 0..k {
                let w: f64 = (0..dil.multiplicity).map(|r| dil.isometry[(i * dil.multiplicity + r, p)].norm_sqr()).sum();
                assert!((w - 1.0 / k as f64).abs() < 1e-12, "{w}");
            }
        }
        let x = gaussian_matrix(k, k, 4);
        let expected = choi.apply(&x).unwrap();
        assert!(op_norm(&(&dil.compress(&x) - &expected)).unwrap() < 1e-12);
    }

    #[test]
    fn unitary_conjugation_is_rank_one() {
        let v = haar_unitary(3, 11).unwrap();
        let choi = ChoiMatrix::from_map(3, 3, |x| v.matmul(x).mul_adjoint(&v)).unwrap();
        let dil = stinespring_factor(&choi).unwrap();
        assert_eq!(dil.dilation_dim, 3);
        // S = v* up to phase.
        let vs = v.adjoint();
        let phase = crate::matkit::vec_dot(&vs.col_vec(0), &dil.isometry.col_vec(0));
        assert!(op_norm(&(&dil.isometry - &vs.scale(phase))).unwrap() < 1e-10);
    }

    #[test]
    fn stinespring_rejects_non_unital() {
        let choi = ChoiMatrix::from_map(2, 2, |x| x.scale_real(2.0)).unwrap();
        assert!(stinespring_factor(&choi).unwrap_err().is_input_error());
        let choi = ChoiMatrix::from_map(2, 2, |x| x.transpose()).unwrap();
        assert!(stinespring_factor(&choi).unwrap_err().is_input_error());
    }

    #[test]
    fn identity_extension() {
        let span = SpanSpec::new(vec![z()], true).unwrap();
        let target = UnitalMapSpec::new(vec![z()]).unwrap();
        let choi = feasible_choi(&span, &target);
        assert!(op_norm(&(&choi.apply(&z()).unwrap() - &z())).unwrap() < 1e-12);
        let report = hom_extension_check(&span, &target).unwrap();
        assert_eq!(report.verdict, HomVerdict::Pass);
        let ext = report.extension.unwrap();
        assert!(ext.range_defects.iter().all(|&d| d < 1e-10), "{:?}", ext.range_defects);
        assert!(ext.multiplicativity_defect < 1e-10);
        assert_eq!(ext.words_checked, 2 * 2 + 2 * 2 * 4);
    }

    #[test]
    fn identity_map_on_full_algebra() {
        // With both Pauli generators the span is all of M_2, so the extension is the identity.
        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let y = CMatrix::from_rows(&[&[c(0.0, 0.0), c(0.0, -1.0)], &[c(0.0, 1.0), c(0.0, 0.0)]]);
        let span = SpanSpec::new(vec![z(), x.clone(), y.clone()], true).unwrap();
        let target = UnitalMapSpec::new(vec![z(), x, y]).unwrap();
        let choi = feasible_choi(&span, &target);
        let ident = ChoiMatrix::from_map(2, 2, |x| x.clone()).unwrap();
        assert!(op_norm(&(choi.matrix() - ident.matrix())).unwrap() < 1e-10);
        let dil = stinespring_factor(&choi).unwrap();
        assert_eq!(dil.dilation_dim, 2);
    }

    #[test]
    fn hadamard_conjugation_extension() {
        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let span = SpanSpec::new(vec![z()], true).unwrap();
        let target = UnitalMapSpec::new(vec![x.clone()]).unwrap();
        let choi = feasible_choi(&span, &target);
        assert!(op_norm(&(&choi.apply(&z()).unwrap() - &x)).unwrap() < 1e-12);
        assert!(psd_check(choi.matrix(), 1e-10).unwrap());
        let report = hom_extension_check(&span, &target).unwrap();
        assert_eq!(report.verdict, HomVerdict::Pass, "{report:?}");
    }

    #[test]
    fn spectrum_obstruction_has_no_extension() {
        let u = CMatrix::diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let span = SpanSpec::new(vec![u], true).unwrap();
        let target = UnitalMapSpec::new(vec![CMatrix::identity(1)]).unwrap();
        match cp_extension(&span, &target).unwrap() {
            CpExtension::Infeasible(cert) => {
                assert!(cert.separating_value > 1e-8);
                assert!(cert.max_block_eigenvalue <= 1e-8);
            }
            other => panic!("{other:?}"),
        }
        let report = hom_extension_check(&span, &target).unwrap();
        assert_eq!(report.verdict, HomVerdict::NoCpExtension);
        assert!(report.extension.is_none());
    }

    #[test]
    fn character_on_spectrum_extends() {
        let u = CMatrix::diag(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let span = SpanSpec::new(vec![u.clone()], true).unwrap();
        let ok = UnitalMapSpec::new(vec![CMatrix::diag(&[c(0.0, 1.0)])]).unwrap();
        assert_eq!(hom_extension_check(&span, &ok).unwrap().verdict, HomVerdict::Pass);
        let bad = UnitalMapSpec::new(vec![CMatrix::diag(&[c(0.0, -1.0)])]).unwrap();
        assert_eq!(hom_extension_check(&span, &bad).unwrap().verdict, HomVerdict::NoCpExtension);
    }

    #[test]
    fn non_unitary_target_rejected() {
        let span = SpanSpec::new(vec![z()], true).unwrap();
        let target = UnitalMapSpec::new(vec![CMatrix::zeros(2, 2)]).unwrap();
        assert!(matches!(hom_extension_check(&span, &target), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn random_conjugation_pair() {
        let u1 = haar_unitary(2, 21).unwrap();
        let u2 = haar_unitary(2, 22).unwrap();
        let v = haar_unitary(2, 23).unwrap();
        let conj = |u: &CMatrix| v.matmul(u).mul_adjoint(&v);
        let span = SpanSpec::new(vec![u1.clone(), u2.clone()], true).unwrap();
        let target = UnitalMapSpec::new(vec![conj(&u1), conj(&u2)]).unwrap();
        let report = hom_extension_check(&span, &target).unwrap();
        assert_eq!(report.verdict, HomVerdict::Pass, "{report:?}");
        let ext = report.extension.unwrap();
        assert!(ext.reconstruction_error < 1e-10);
        assert!(ext.multiplicativity_defect < 1e-8);
    }

    #[test]
    fn direct_sum_amplification() {
        let u = haar_unitary(2, 5).unwrap();
        let span = SpanSpec::new(vec![u.clone()], true).unwrap();
        let target = UnitalMapSpec::new(vec![u.direct_sum(&u)]).unwrap();
        let report = hom_extension_check(&span, &target).unwrap();
        assert_eq!(report.verdict, HomVerdict::Pass, "{report:?}");
    }

    #[test]
    fn reconstruction_on_random_inputs() {
        let u1 = haar_unitary(2, 31).unwrap();
        let u2 = haar_unitary(2, 32).unwrap();
        let span = SpanSpec::new(vec![u1.clone()], true).unwrap();
        let target = UnitalMapSpec::new(vec![u2.adjoint().matmul(&u1).matmul(&u2)]).unwrap();
        let choi = feasible_choi(&span, &target);
        let dil = stinespring_factor(&choi).unwrap();
        for s in 0..100 {
            let x = gaussian_matrix(2, 2, 1000 + s);
            let lhs = choi.apply(&x).unwrap();
            let rhs = dil.compress(&x);
            let scale = op_norm(&x).unwrap();
            assert!(op_norm(&(&lhs - &rhs)).unwrap() <= 1e-7 * scale);
        }
    }

    #[test]
    fn choi_psd_means_cp_on_two_copies() {
        let u = haar_unitary(2, 41).unwrap();
        let span = SpanSpec::new(vec![u.clone()], true).unwrap();
        let v = haar_unitary(2, 42).unwrap();
        let target = UnitalMapSpec::new(vec![v.matmul(&u).mul_adjoint(&v)]).unwrap();
        let choi = feasible_choi(&span, &target);
        for s in 0..20 {
            let g = gaussian_matrix(4, 4, 500 + s);
            let x = g.mul_adjoint(&g);
            let mut out = CMatrix::zeros(4, 4);
            for a in 0..2 {
                for b in 0..2 {
                    out.set_sub_matrix(a * 2, b * 2, &choi.apply(&x.sub_matrix(a * 2, b * 2, 2, 2)).unwrap());
                }
            }
            assert!(psd_check(&out.hermitian_part(), 1e-8).unwrap());
        }
    }

    #[test]
    fn transpose_is_not_cp() {
        let choi = ChoiMatrix::from_map(2, 2, |x| x.transpose()).unwrap();
        assert!(!psd_check(choi.matrix(), 1e-8).unwrap());
    }

    fn rotation(theta: f64) -> CMatrix {
        let (s, co) = theta.sin_cos();
        CMatrix::from_real_rows(&[&[co, -s], &[s, co]])
    }

    #[test]
    fn rotation_defect_is_sine() {
        let s = CMatrix::column(&[c(1.0, 0.0), c(0.0, 0.0)]);
        for i in 0..100 {
            let theta = -3.0 + 6.0 * i as f64 / 99.0;
            let d = range_invariance_defect(&rotation(theta), &s).unwrap();
            assert!((d - theta.sin().abs()).abs() < 1e-9, "{theta}: {d}");
        }
    }

    #[test]
    fn trivial_defects() {
        let u = haar_unitary(3, 2).unwrap();
        assert!(range_invariance_defect(&u, &CMatrix::identity(3)).unwrap() < 1e-12);
        let block = u.direct_sum(&haar_unitary(2, 3).unwrap());
        let s = CMatrix::from_fn(5, 3, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(range_invariance_defect(&block, &s).unwrap() < 1e-12);
        let bad = s.scale_real(2.0);
        assert!(matches!(range_invariance_defect(&block, &bad), Err(Error::NotIsometry { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn defect_squared_is_compression_unitarity(seed in 0u64..10_000, d in 2usize..6, m in 1usize..4) {
            prop_assume!(m < d);
            let u = haar_unitary(d, seed).unwrap();
            let s = crate::matkit::haar_isometry(d, m, seed.wrapping_add(1)).unwrap();
            let defect = range_invariance_defect(&u, &s).unwrap();
            let comp = s.adjoint_mul(&u.matmul(&s));
            let unitarity = comp.isometry_residual();
            prop_assert!((defect * defect - unitarity).abs() < 1e-8);
        }
    }
}
