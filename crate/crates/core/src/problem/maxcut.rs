use std::collections::BTreeMap;

use nalgebra::DVector;

use super::ops::{Constraints, SparseSym};
use super::{ProblemKind, RowLabel, SdpProblem};
use crate::error::{Error, Result};

/// Undirected weighted graph; edges stored once with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphInstance {
    /// Self-loops are dropped and parallel edges summed.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidProblem(format!("edge ({u}, {v}) outside {n} vertices")));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite("edge weight"));
            }
            if u != v {
                *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += w;
            }
        }
        Ok(Self {
            n,
            edges: merged.into_iter().map(|((u, v), w)| (u, v, w)).collect(),
        })
    }

    pub fn laplacian(&self) -> SparseSym {
        let mut trip = Vec::with_capacity(3 * self.edges.len());
        for &(u, v, w) in &self.edges {
            trip.push((u, u, w));
            trip.push((v, v, w));
            trip.push((v, u, -w));
        }
        SparseSym::from_triplets(self.n, trip)
    }

    /// `¼ xᵀLx` for a ±1 vector.
    pub fn cut_value(&self, x: &[i8]) -> f64 {
        self.edges
            .iter()
            .filter(|&&(u, v, _)| x[u] != x[v])
            .map(|&(_, _, w)| w)
            .sum()
    }

    /// Vertices `0..keep` and the edges among them.
    pub fn induced_prefix(&self, keep: usize) -> Self {
        Self {
            n: keep,
            edges: self.edges.iter().copied().filter(|&(u, v, _)| u < keep && v < keep).collect(),
        }
    }
}

/// `max ⟨L/4, X⟩ s.t. diag(X) = 1, X ⪰ 0`, scaled to `‖C‖_F = 1` and
/// `tr(X⋆) = 1`, with `α = 2`.
pub fn build_maxcut(g: &GraphInstance) -> Result<SdpProblem> {
    if g.n == 0 {
        return Err(Error::InvalidProblem("graph has no vertices".into()));
    }
    let mut cost = g.laplacian();
    cost.scale(0.25);
    let mut p = SdpProblem::new(cost, Constraints::diagonal(g.n), DVector::from_element(g.n, 1.0), &[], 2.0)?;
    p.scale_primal(g.n as f64);
    p.normalize_cost();
    p.kind = ProblemKind::MaxCut;
    p.labels = (0..g.n).map(|i| RowLabel::new(0, &[i])).collect();
    Ok(p)
}
