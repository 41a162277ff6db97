//! SDP problem data `(C, 𝒜, b, ℐ, α)`, scaling, and the projections onto
//! `𝒦` and the slack cone `N = b − 𝒦`.

mod io;
mod maxcut;
mod ops;
mod qap;

use nalgebra::{DMatrix, DVector};

use crate::eigsolve::LinOp;
use crate::error::{Error, Result};

pub use io::{
    parse_graph_mm, parse_graph_mm_str, parse_mapping, parse_mapping_str, parse_qaplib, parse_qaplib_str, write_graph_mm,
    write_mapping, write_qaplib,
};
pub use maxcut::{build_maxcut, GraphInstance};
pub use ops::{Constraints, DiagonalConstraints, EntryConstraints, SparseSym};
pub use qap::{build_qap, partial_traces, qap_primal_index, QapInstance};

/// Whether the original (unscaled) problem maximizes or minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Generic,
    MaxCut,
    Qap { size: usize },
}

/// Structural identity of a constraint row in terms of instance entities
/// (vertices, facilities, locations); used to carry duals across
/// instances of different sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RowLabel {
    pub family: u8,
    pub idx: [u32; 4],
}

impl RowLabel {
    pub const NONE: u32 = u32::MAX;

    pub fn new(family: u8, idx: &[usize]) -> Self {
        let mut out = [Self::NONE; 4];
        for (o, &i) in out.iter_mut().zip(idx) {
            *o = i as u32;
        }
        Self { family, idx: out }
    }

    fn remap(&self, entity: &[usize]) -> Option<Self> {
        let mut idx = self.idx;
        for i in &mut idx {
            if *i != Self::NONE {
                *i = *entity.get(*i as usize)? as u32;
            }
        }
        Some(Self {
            family: self.family,
            idx,
        })
    }
}

/// `max ⟨C, X⟩ s.t. (𝒜X)_ℐ ≤ b_ℐ, (𝒜X)_ℐ′ = b_ℐ′, X ⪰ 0, tr(X) ≤ α`.
///
/// The stored data are scaled; `scale_c`, `scale_x` and `row_scale`
/// translate back: `X_orig = scale_x·X`, `C_orig = ±scale_c·C`,
/// `A_orig,i = Aᵢ / row_scaleᵢ`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n: usize,
    pub cost: SparseSym,
    pub constraints: Constraints,
    pub b: DVector<f64>,
    ineq_mask: Vec<bool>,
    pub alpha: f64,
    pub scale_c: f64,
    pub scale_x: f64,
    pub row_scale: Vec<f64>,
    pub sense: Sense,
    pub kind: ProblemKind,
    pub labels: Vec<RowLabel>,
}

impl SdpProblem {
    pub fn new(
        cost: SparseSym,
        constraints: Constraints,
        b: DVector<f64>,
        ineq: &[usize],
        alpha: f64,
    ) -> Result<Self> {
        let n = cost.n();
        let m = constraints.m();
        if n == 0 {
            return Err(Error::InvalidProblem("primal dimension is zero".into()));
        }
        if b.len() != m {
            return Err(Error::Dimension(format!("b has length {}, expected {m}", b.len())));
        }
        if constraints.dim_hint().is_some_and(|d| d != n) {
            return Err(Error::Dimension("constraint operator and cost differ in size".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidProblem(format!("alpha must be positive, got {alpha}")));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        let mut ineq_mask = vec![false; m];
        for &i in ineq {
            if i >= m {
                return Err(Error::InvalidProblem(format!("inequality index {i} out of range")));
            }
            ineq_mask[i] = true;
        }
        Ok(Self {
            n,
            cost,
            constraints,
            b,
            ineq_mask,
            alpha,
            scale_c: 1.0,
            scale_x: 1.0,
            row_scale: vec![1.0; m],
            sense: Sense::Maximize,
            kind: ProblemKind::Generic,
            labels: (0..m).map(|i| RowLabel::new(255, &[i])).collect(),
        })
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn is_ineq(&self, i: usize) -> bool {
        self.ineq_mask[i]
    }

    pub fn ineq_mask(&self) -> &[bool] {
        &self.ineq_mask
    }

    pub fn ineq_set(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| self.ineq_mask[i]).collect()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_mask.iter().filter(|&&f| f).count()
    }

    /// Rescales so that `‖C‖_F = 1` (no-op for `C = 0`).
    pub fn normalize_cost(&mut self) {
        let nrm = self.cost.frobenius_norm();
        if nrm > 0.0 {
            self.cost.scale(1.0 / nrm);
            self.scale_c *= nrm;
        }
    }

    /// Substitutes `X = s·X'`, i.e. divides `b` by `s`.
    pub fn scale_primal(&mut self, s: f64) {
        self.b /= s;
        self.scale_x *= s;
    }

    /// `Aᵢ ← dᵢAᵢ`, `bᵢ ← dᵢbᵢ`.
    pub fn scale_rows(&mut self, d: &[f64]) {
        self.constraints.scale_rows(d);
        for (i, &s) in d.iter().enumerate() {
            self.b[i] *= s;
            self.row_scale[i] *= s;
        }
    }

    /// Objective of the original instance given `⟨C, X⟩` in scaled terms.
    pub fn original_objective(&self, scaled: f64) -> f64 {
        let v = self.scale_c * self.scale_x * scaled;
        match self.sense {
            Sense::Maximize => v,
            Sense::Minimize => -v,
        }
    }

    /// Euclidean projection onto `𝒦 = {z : z_ℐ ≤ b_ℐ, z_ℐ′ = b_ℐ′}`.
    pub fn proj_k(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            z.len(),
            (0..z.len()).map(|i| if self.ineq_mask[i] { z[i].min(self.b[i]) } else { self.b[i] }),
        )
    }

    /// Euclidean projection onto the slack cone `N = b − 𝒦 =
    /// {ν : ν_ℐ ≥ 0, ν_ℐ′ = 0}`.
    pub fn proj_n(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            z.len(),
            (0..z.len()).map(|i| if self.ineq_mask[i] { z[i].max(0.0) } else { 0.0 }),
        )
    }

    /// `C − 𝒜*y` as an implicit operator.
    pub fn slack_op<'a>(&'a self, y: &'a DVector<f64>) -> SlackOp<'a> {
        SlackOp { prob: self, y }
    }

    /// Dense `C − 𝒜*y`, for small-scale checks.
    pub fn slack_dense(&self, y: &DVector<f64>) -> DMatrix<f64> {
        self.cost.to_dense() - self.constraints.adjoint_dense(y, self.n)
    }
}

pub struct SlackOp<'a> {
    prob: &'a SdpProblem,
    y: &'a DVector<f64>,
}

impl LinOp for SlackOp<'_> {
    fn dim(&self) -> usize {
        self.prob.n
    }

    fn apply(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        self.prob.cost.matvec(x, out);
        out.neg_mut();
        self.prob.constraints.adjoint_matvec_add(self.y, x, out);
        out.neg_mut();
    }
}

/// Embedding of an old problem's indices into a new problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMapping {
    /// Old primal index → new primal index.
    pub primal: Vec<usize>,
    /// Old constraint row → new row (`None`: dropped).
    pub constraints: Vec<Option<usize>>,
}

impl IndexMapping {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            primal: (0..n).collect(),
            constraints: (0..m).map(Some).collect(),
        }
    }

    /// Derives the mapping from a map of instance entities (vertices for
    /// MaxCut; facility/location indices for QAP).
    pub fn from_entity_map(old: &SdpProblem, new: &SdpProblem, entity: &[usize]) -> Result<Self> {
        let primal = match (old.kind, new.kind) {
            (ProblemKind::MaxCut, ProblemKind::MaxCut) => {
                if entity.len() != old.n {
                    return Err(Error::Mapping(format!("expected {} entities, got {}", old.n, entity.len())));
                }
                entity.to_vec()
            }
            (ProblemKind::Qap { size: a }, ProblemKind::Qap { size: b }) => {
                if entity.len() != a {
                    return Err(Error::Mapping(format!("expected {a} entities, got {}", entity.len())));
                }
                let mut p = vec![0; old.n];
                for j in 0..a {
                    for i in 0..a {
                        p[qap_primal_index(a, i, j)] = qap_primal_index(b, entity[i], entity[j]);
                    }
                }
                p
            }
            _ => return Err(Error::Mapping("entity maps need matching MaxCut or QAP problems".into())),
        };
        if let Some(&bad) = primal.iter().find(|&&p| p >= new.n) {
            return Err(Error::Mapping(format!("primal index {bad} ≥ {}", new.n)));
        }
        let lookup: std::collections::HashMap<RowLabel, usize> =
            new.labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let constraints = old
            .labels
            .iter()
            .map(|l| l.remap(entity).and_then(|l| lookup.get(&l).copied()))
            .collect();
        Ok(Self { primal, constraints })
    }

    pub fn validate(&self, old_n: usize, old_m: usize, new_n: usize, new_m: usize) -> Result<()> {
        if self.primal.len() != old_n || self.constraints.len() != old_m {
            return Err(Error::Mapping(format!(
                "mapping covers {}×{} indices, state has {old_n}×{old_m}",
                self.primal.len(),
                self.constraints.len()
            )));
        }
        if let Some(&p) = self.primal.iter().find(|&&p| p >= new_n) {
            return Err(Error::Mapping(format!("primal index {p} ≥ {new_n}")));
        }
        if let Some(c) = self.constraints.iter().flatten().find(|&&c| c >= new_m) {
            return Err(Error::Mapping(format!("constraint index {c} ≥ {new_m}")));
        }
        let mut seen = vec![false; new_n];
        for &p in &self.primal {
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::Mapping(format!("primal index {p} mapped twice")));
            }
        }
        Ok(())
    }
}
