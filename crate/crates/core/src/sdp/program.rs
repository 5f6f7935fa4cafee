use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

#[allow(unused_imports)] // f64 math in no_std builds
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{herm_eig_unchecked, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScalarId(pub usize);

/// Hermitian PSD matrix variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub name: String,
    pub dim: usize,
}

/// One summand of the left side of an equality constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    /// `left · X_block · right`.
    Block { block: BlockId, left: CMatrix, right: CMatrix },
    /// `value(var) · coeff` for a free real variable.
    Scalar { var: ScalarId, coeff: CMatrix },
}

fn selector(rows: usize, cols: usize, offset_row: usize, offset_col: usize, len: usize) -> CMatrix {
    let mut s = CMatrix::zeros(rows, cols);
    for i in 0..len {
        s[(offset_row + i, offset_col + i)] = C64::new(1.0, 0.0);
    }
    s
}

impl Term {
    pub fn block(block: BlockId, left: CMatrix, right: CMatrix) -> Self {
        Term::Block { block, left, right }
    }

    /// The whole block, scaled by `coeff`.
    pub fn whole(block: BlockId, dim: usize, coeff: C64) -> Self {
        Term::Block { block, left: CMatrix::identity(dim).scale(coeff), right: CMatrix::identity(dim) }
    }

    /// `coeff · X[r0..r0+nr, c0..c0+nc]` for a block of dimension `dim`.
    pub fn sub_block(block: BlockId, dim: usize, r0: usize, nr: usize, c0: usize, nc: usize, coeff: C64) -> Self {
        let left = selector(nr, dim, 0, r0, nr).scale(coeff);
        let right = selector(dim, nc, c0, 0, nc);
        Term::Block { block, left, right }
    }

    pub fn scalar(var: ScalarId, coeff: CMatrix) -> Self {
        Term::Scalar { var, coeff }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            Term::Block { left, right, .. } => (left.rows(), right.cols()),
            Term::Scalar { coeff, .. } => coeff.shape(),
        }
    }
}

/// `Σ terms = rhs`, an equation between `p×q` complex matrices.
///
/// With `hermitian` set, both sides are Hermitian for every Hermitian
/// assignment and only the upper triangle is imposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityConstraint {
    pub name: String,
    pub terms: Vec<Term>,
    pub rhs: CMatrix,
    pub hermitian: bool,
}

/// `Σ Re tr(C_b X_b) + Σ c_s w_s`, to be minimized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub blocks: Vec<(BlockId, CMatrix)>,
    pub scalars: Vec<(ScalarId, f64)>,
}

/// Block-structured semidefinite program in equality form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LmiProgram {
    pub psd_blocks: Vec<PsdBlock>,
    pub scalar_vars: Vec<String>,
    pub equality_constraints: Vec<EqualityConstraint>,
    pub objective: Objective,
}

impl LmiProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> BlockId {
        self.psd_blocks.push(PsdBlock { name: name.into(), dim });
        BlockId(self.psd_blocks.len() - 1)
    }

    pub fn add_scalar(&mut self, name: impl Into<String>) -> ScalarId {
        self.scalar_vars.push(name.into());
        ScalarId(self.scalar_vars.len() - 1)
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<Term>, rhs: CMatrix, hermitian: bool) {
        self.equality_constraints.push(EqualityConstraint { name: name.into(), terms, rhs, hermitian });
    }

    pub fn minimize_block(&mut self, block: BlockId, cost: CMatrix) {
        self.objective.blocks.push((block, cost));
    }

    pub fn minimize_scalar(&mut self, var: ScalarId, cost: f64) {
        self.objective.scalars.push((var, cost));
    }

    pub fn block_dim(&self, b: BlockId) -> usize {
        self.psd_blocks[b.0].dim
    }

    pub fn block_by_name(&self, name: &str) -> Option<BlockId> {
        self.psd_blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn scalar_by_name(&self, name: &str) -> Option<ScalarId> {
        self.scalar_vars.iter().position(|s| s == name).map(ScalarId)
    }

    /// True when the objective has no nonzero coefficient.
    pub fn is_feasibility_problem(&self) -> bool {
        self.objective.blocks.iter().all(|(_, c)| c.max_abs() == 0.0)
            && self.objective.scalars.iter().all(|(_, c)| *c == 0.0)
    }

    /// Checks references, shapes, finiteness and Hermitian data.
    pub fn validate(&self) -> Result<()> {
        if self.psd_blocks.is_empty() && self.scalar_vars.is_empty() {
            return Err(Error::InvalidArgument("program declares no variables".into()));
        }
        for b in &self.psd_blocks {
            if b.dim == 0 {
                return Err(Error::InvalidArgument(format!("block '{}' has dimension 0", b.name)));
            }
        }
        let check_block = |id: BlockId| -> Result<usize> {
            self.psd_blocks
                .get(id.0)
                .map(|b| b.dim)
                .ok_or_else(|| Error::InvalidArgument(format!("undeclared block #{}", id.0)))
        };
        let check_scalar = |id: ScalarId| -> Result<()> {
            if id.0 < self.scalar_vars.len() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("undeclared scalar #{}", id.0)))
            }
        };
        for con in &self.equality_constraints {
            if !con.rhs.is_finite() {
                return Err(Error::NonFinite);
            }
            let shape = con.rhs.shape();
            if con.hermitian && shape.0 != shape.1 {
                return Err(Error::Dimension(format!("Hermitian constraint '{}' is not square", con.name)));
            }
            if con.hermitian && con.rhs.hermitian_defect() > 1e-12 * con.rhs.max_abs().max(1.0) {
                return Err(Error::NotHermitian { defect: con.rhs.hermitian_defect() });
            }
            for term in &con.terms {
                if term.shape() != shape {
                    return Err(Error::Dimension(format!(
                        "constraint '{}': term of shape {:?} against right side {:?}",
                        con.name,
                        term.shape(),
                        shape
                    )));
                }
                match term {
                    Term::Block { block, left, right } => {
                        let dim = check_block(*block)?;
                        if left.cols() != dim || right.rows() != dim {
                            return Err(Error::Dimension(format!(
                                "constraint '{}': multipliers do not fit block of dimension {}",
                                con.name, dim
                            )));
                        }
                        if !left.is_finite() || !right.is_finite() {
                            return Err(Error::NonFinite);
                        }
                    }
                    Term::Scalar { var, coeff } => {
                        check_scalar(*var)?;
                        if !coeff.is_finite() {
                            return Err(Error::NonFinite);
                        }
                    }
                }
            }
        }
        for (b, cost) in &self.objective.blocks {
            let dim = check_block(*b)?;
            if cost.shape() != (dim, dim) {
                return Err(Error::Dimension(format!("objective matrix for block #{} has wrong shape", b.0)));
            }
            if !cost.is_finite() {
                return Err(Error::NonFinite);
            }
            let defect = cost.hermitian_defect();
            if defect > 1e-12 * cost.max_abs().max(1.0) {
                return Err(Error::NotHermitian { defect });
            }
        }
        for (s, cost) in &self.objective.scalars {
            check_scalar(*s)?;
            if !cost.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    /// Left side minus right side of every constraint at the given point.
    pub fn residuals(&self, values: &PrimalValues) -> Vec<CMatrix> {
        self.equality_constraints
            .iter()
            .map(|con| {
                let mut acc = -&con.rhs;
                for term in &con.terms {
                    match term {
                        Term::Block { block, left, right } => {
                            acc = &acc + &left.matmul(&values.blocks[block.0]).matmul(right);
                        }
                        Term::Scalar { var, coeff } => {
                            acc.axpy(C64::new(values.scalars[var.0], 0.0), coeff);
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Largest entry of any constraint residual.
    pub fn max_violation(&self, values: &PrimalValues) -> f64 {
        self.residuals(values).iter().map(|r| r.max_abs()).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, values: &PrimalValues) -> f64 {
        let mut v = 0.0;
        for (b, cost) in &self.objective.blocks {
            v += cost.adjoint().real_inner(&values.blocks[b.0]);
        }
        for (s, cost) in &self.objective.scalars {
            v += cost * values.scalars[s.0];
        }
        v
    }

    /// Checks a Farkas witness `Y`: the induced functional must be ⪯ 0 on
    /// every block, vanish on the free scalars, and be positive on the right
    /// side. Returns `(rhs value, largest block eigenvalue, scalar residual)`
    /// after normalizing `Y` to unit Frobenius norm.
    pub fn farkas_check(&self, multipliers: &[CMatrix]) -> FarkasCheck {
        let norm = multipliers.iter().map(|y| y.frobenius().powi(2)).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        let mut block_forms: Vec<CMatrix> = self.psd_blocks.iter().map(|b| CMatrix::zeros(b.dim, b.dim)).collect();
        let mut scalar_forms = vec![0.0; self.scalar_vars.len()];
        let mut rhs_value = 0.0;
        for (con, y) in self.equality_constraints.iter().zip(multipliers) {
            let y = y.scale_real(scale);
            rhs_value += y.real_inner(&con.rhs);
            for term in &con.terms {
                match term {
                    Term::Block { block, left, right } => {
                        // Re tr(Y^* L X R) = Re tr((R Y^* L) X).
                        let g = right.matmul(&y.adjoint()).matmul(left);
                        block_forms[block.0] = &block_forms[block.0] + &g.hermitian_part();
                    }
                    Term::Scalar { var, coeff } => {
                        scalar_forms[var.0] += y.real_inner(coeff);
                    }
                }
            }
        }
        let max_eig = block_forms
            .iter()
            .map(|f| herm_eig_unchecked(f).eigenvalues.last().copied().unwrap_or(0.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let scalar_residual = scalar_forms.iter().map(|v| v.abs()).fold(0.0, f64::max);
        FarkasCheck { rhs_value, max_block_eigenvalue: max_eig, scalar_residual }
    }
}

/// Outcome of [`LmiProgram::farkas_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarkasCheck {
    pub rhs_value: f64,
    pub max_block_eigenvalue: f64,
    pub scalar_residual: f64,
}

impl FarkasCheck {
    /// A separating functional with violation at least `threshold`.
    pub fn separates(&self, threshold: f64) -> bool {
        self.rhs_value >= threshold
            && self.max_block_eigenvalue <= 1e-3 * self.rhs_value
            && self.scalar_residual <= 1e-3 * self.rhs_value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Assignment to every declared variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalValues {
    pub blocks: Vec<CMatrix>,
    pub scalars: Vec<f64>,
}

impl PrimalValues {
    pub fn block(&self, id: BlockId) -> &CMatrix {
        &self.blocks[id.0]
    }

    pub fn scalar(&self, id: ScalarId) -> f64 {
        self.scalars[id.0]
    }
}

/// Dual information: one complex multiplier per constraint (same shape as
/// its right side) and the dual slack of each block. For an infeasible
/// program the multipliers form the Farkas witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub multipliers: Vec<CMatrix>,
    pub slacks: Vec<CMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal_values: PrimalValues,
    pub dual_certificate: DualCertificate,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal - dual| / (1 + |primal| + |dual|)`.
    pub duality_gap: f64,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}
