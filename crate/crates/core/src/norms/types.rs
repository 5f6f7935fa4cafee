use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{CMatrix, C64, MAX_FACTOR_DIM};

/// A finite family `(x_i)` of `k×k` matrices.
///
/// When `unit_index` is set, that entry is paired with the unit instead of a
/// free unitary: the lower engine pins its unitary to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTuple")]
pub struct OperatorTuple {
    k: usize,
    items: Vec<CMatrix>,
    unit_index: Option<usize>,
}

#[derive(Deserialize)]
struct RawTuple {
    #[allow(dead_code)]
    k: usize,
    items: Vec<CMatrix>,
    unit_index: Option<usize>,
}

impl TryFrom<RawTuple> for OperatorTuple {
    type Error = Error;

    fn try_from(raw: RawTuple) -> Result<Self> {
        let t = OperatorTuple::new(raw.items, raw.unit_index)?;
        if t.k != raw.k {
            return Err(Error::Dimension(format!("declared k = {} but items are {}×{}", raw.k, t.k, t.k)));
        }
        Ok(t)
    }
}

impl OperatorTuple {
    pub fn new(items: Vec<CMatrix>, unit_index: Option<usize>) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::InvalidArgument("tuple must not be empty".into()))?;
        let k = first.rows();
        if k == 0 || k > MAX_FACTOR_DIM {
            return Err(Error::Dimension(format!("item dimension {k} outside 1..={MAX_FACTOR_DIM}")));
        }
        for (i, x) in items.iter().enumerate() {
            if x.shape() != (k, k) {
                return Err(Error::Dimension(format!(
                    "item {i} is {}×{}, expected {k}×{k}",
                    x.rows(),
                    x.cols()
                )));
            }
            if !x.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        if let Some(u) = unit_index {
            if u >= items.len() {
                return Err(Error::InvalidArgument(format!(
                    "unit index {u} out of range for {} items",
                    items.len()
                )));
            }
        }
        Ok(OperatorTuple { k, items, unit_index })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn items(&self) -> &[CMatrix] {
        &self.items
    }

    pub fn unit_index(&self) -> Option<usize> {
        self.unit_index
    }

    /// `max_i ‖x_i‖`.
    pub fn max_item_norm(&self) -> f64 {
        self.items.iter().map(crate::matkit::op_norm_unchecked).fold(0.0, f64::max)
    }

    /// Every item multiplied by `s`.
    pub fn scaled(&self, s: C64) -> OperatorTuple {
        OperatorTuple { k: self.k, items: self.items.iter().map(|x| x.scale(s)).collect(), unit_index: self.unit_index }
    }

    /// Items reordered by `perm` (new position `j` holds old item `perm[j]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<OperatorTuple> {
        let mut seen = alloc::vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || core::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the tuple indices".into()));
        }
        let items = perm.iter().map(|&p| self.items[p].clone()).collect();
        let unit_index = self.unit_index.map(|u| perm.iter().position(|&p| p == u).unwrap());
        Ok(OperatorTuple { k: self.k, items, unit_index })
    }

    /// `Σ x_i`.
    pub fn sum(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.k, self.k);
        for x in &self.items {
            s = &s + x;
        }
        s
    }
}

/// Explicit factorization `x_i = a_i b_i` witnessing an upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCertificate {
    pub a: Vec<CMatrix>,
    pub b: Vec<CMatrix>,
    /// `‖Σ a_i a_i*‖^{1/2} ‖Σ b_i* b_i‖^{1/2}`.
    pub value: f64,
    /// `max_i ‖a_i b_i − x_i‖`.
    pub residual: f64,
}

/// Unitaries and a unit vector attaining a lower bound on `‖Σ u_i ⊗ x_i‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryWitness {
    pub d: usize,
    pub unitaries: Vec<CMatrix>,
    /// Unit vector of length `d·k`, indexed `a·k + p`.
    pub vector: Vec<C64>,
    /// `‖(Σ u_i ⊗ x_i) · vector‖`.
    pub value: f64,
}

/// Best value seen after finishing one schedule dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub dimension: usize,
    pub restarts: usize,
    /// Running maximum over all dimensions so far.
    pub best_value: f64,
}

/// Two-sided estimate of the min-norm of a tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub upper_cert: FactorizationCertificate,
    pub lower_cert: UnitaryWitness,
    pub trace: Vec<TraceRecord>,
}

impl NormEstimate {
    /// `(upper − lower) / upper`, or 0 when both vanish.
    pub fn relative_gap(&self) -> f64 {
        if self.upper > 0.0 {
            self.gap / self.upper
        } else {
            0.0
        }
    }
}

/// `Σ_l c_l ⊗ d_l` with `c_l ∈ M_k`, `d_l ∈ M_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawElement")]
pub struct HTensorElement {
    k: usize,
    m: usize,
    terms: Vec<(CMatrix, CMatrix)>,
}

#[derive(Deserialize)]
struct RawElement {
    k: usize,
    m: usize,
    terms: Vec<(CMatrix, CMatrix)>,
}

impl TryFrom<RawElement> for HTensorElement {
    type Error = Error;

    fn try_from(raw: RawElement) -> Result<Self> {
        let e = HTensorElement::new(raw.terms)?;
        if (e.k, e.m) != (raw.k, raw.m) {
            return Err(Error::Dimension(format!(
                "declared factor dimensions ({}, {}) but terms are ({}, {})",
                raw.k, raw.m, e.k, e.m
            )));
        }
        Ok(e)
    }
}

impl HTensorElement {
    pub fn new(terms: Vec<(CMatrix, CMatrix)>) -> Result<Self> {
        let (c0, d0) = terms.first().ok_or_else(|| Error::InvalidArgument("element needs at least one term".into()))?;
        let (k, m) = (c0.rows(), d0.rows());
        if k == 0 || m == 0 || k > MAX_FACTOR_DIM || m > MAX_FACTOR_DIM {
            return Err(Error::Dimension(format!("factor dimensions ({k}, {m}) outside 1..={MAX_FACTOR_DIM}")));
        }
        for (l, (c, d)) in terms.iter().enumerate() {
            if c.shape() != (k, k) || d.shape() != (m, m) {
                return Err(Error::Dimension(format!("term {l} does not match factor dimensions ({k}, {m})")));
            }
            if !c.is_finite() || !d.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(HTensorElement { k, m, terms })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> &[(CMatrix, CMatrix)] {
        &self.terms
    }

    /// The element as a `km×km` matrix, `Σ c_l ⊗ d_l`.
    pub fn to_matrix(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.k * self.m, self.k * self.m);
        for (c, d) in &self.terms {
            out = &out + &crate::matkit::kron(c, d);
        }
        out
    }

    /// `Σ c_l d_l` when `k = m`: the product image under identity representations.
    pub fn multiply_out(&self) -> Option<CMatrix> {
        (self.k == self.m).then(|| {
            let mut out = CMatrix::zeros(self.k, self.k);
            for (c, d) in &self.terms {
                out = &out + &c.matmul(d);
            }
            out
        })
    }

    pub fn scaled(&self, s: C64) -> HTensorElement {
        HTensorElement { k: self.k, m: self.m, terms: self.terms.iter().map(|(c, d)| (c.scale(s), d.clone())).collect() }
    }
}
