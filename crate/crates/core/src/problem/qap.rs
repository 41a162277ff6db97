use nalgebra::{DMatrix, DVector};

use super::ops::{Constraints, EntryConstraints, SparseSym};
use super::{ProblemKind, RowLabel, SdpProblem, Sense};
use crate::error::{Error, Result};

/// `min_Π tr(W Π D Πᵀ)` over permutation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct QapInstance {
    pub size: usize,
    pub w: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub known_optimum: Option<f64>,
}

impl QapInstance {
    pub fn new(w: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n || d.nrows() != n || d.ncols() != n {
            return Err(Error::Dimension(format!(
                "W is {}x{}, D is {}x{}",
                w.nrows(),
                w.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if w != w.transpose() || d != d.transpose() {
            return Err(Error::InvalidProblem("W and D must be symmetric".into()));
        }
        Ok(Self {
            size: n,
            w,
            d,
            known_optimum: None,
        })
    }

    /// `Σ_ab W[a,b]·D[π(a),π(b)]`, i.e. `tr(WΠDΠᵀ)` with `Π[a, π(a)] = 1`.
    pub fn objective(&self, perm: &[usize]) -> f64 {
        let n = self.size;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += self.w[(a, b)] * self.d[(perm[a], perm[b])];
            }
        }
        s
    }

    /// Drops the last facility and location.
    pub fn drop_last(&self) -> Result<Self> {
        if self.size < 2 {
            return Err(Error::InvalidProblem("cannot shrink a QAP of size < 2".into()));
        }
        let k = self.size - 1;
        Self::new(self.w.view((0, 0), (k, k)).into_owned(), self.d.view((0, 0), (k, k)).into_owned())
    }
}

/// Primal index of `B[i, j]` (`= Y` entry `j·n + i`), after the leading 1.
pub fn qap_primal_index(n: usize, i: usize, j: usize) -> usize {
    1 + j * n + i
}

/// `(tr₁(Y), tr₂(Y))` for `Y` of side `n²`, viewing `Y` as an `n × n` grid of
/// `n × n` blocks: `tr₁(A ⊗ M) = tr(A)·M`, `tr₂(A ⊗ M) = tr(M)·A`.
pub fn partial_traces(y: &DMatrix<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let t1 = DMatrix::from_fn(n, n, |i1, i2| (0..n).map(|j| y[(j * n + i1, j * n + i2)]).sum());
    let t2 = DMatrix::from_fn(n, n, |j1, j2| (0..n).map(|i| y[(j1 * n + i, j2 * n + i)]).sum());
    (t1, t2)
}

/// The lifted QAP relaxation on `X = [1 yᵀ; y Y]`, scaled so that
/// `‖C‖_F = tr(X⋆) = ‖𝒜‖_op = 1` with all `‖Aᵢ‖_F` equal, and `α = 2`.
pub fn build_qap(q: &QapInstance) -> Result<SdpProblem> {
    let n = q.size;
    if n == 0 {
        return Err(Error::InvalidProblem("QAP of size zero".into()));
    }
    let nn = n * n;
    let dim = nn + 1;
    let yi = |i: usize, j: usize| qap_primal_index(n, i, j);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut rows: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    let mut b = Vec::new();
    let mut ineq = Vec::new();
    let mut labels = Vec::new();
    let mut push = |row, rhs, is_ineq: bool, label, rows: &mut Vec<_>| {
        if is_ineq {
            ineq.push(rows.len());
        }
        rows.push(row);
        b.push(rhs);
        labels.push(label);
    };

    for i1 in 0..n {
        for i2 in i1..n {
            let row = (0..n).map(|j| (yi(i2, j), yi(i1, j), 1.0)).collect();
            push(row, delta(i1, i2), false, RowLabel::new(1, &[i1, i2]), &mut rows);
        }
    }
    for j1 in 0..n {
        for j2 in j1..n {
            let row = (0..n).map(|i| (yi(i, j2), yi(i, j1), 1.0)).collect();
            push(row, delta(j1, j2), false, RowLabel::new(2, &[j1, j2]), &mut rows);
        }
    }
    for j1 in 0..n {
        for i1 in 0..n {
            for j2 in 0..n {
                for i2 in 0..n {
                    if q.d[(j1, j2)] * q.w[(i1, i2)] != 0.0 {
                        let row = vec![(yi(i1, j1), yi(i2, j2), -1.0)];
                        push(row, 0.0, true, RowLabel::new(3, &[i1, j1, i2, j2]), &mut rows);
                    }
                }
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            let p = yi(i, j);
            push(vec![(p, 0, 1.0), (p, p, -1.0)], 0.0, false, RowLabel::new(4, &[i, j]), &mut rows);
        }
    }
    for i in 0..n {
        let row = (0..n).map(|j| (yi(i, j), 0, 1.0)).collect();
        push(row, 1.0, false, RowLabel::new(5, &[i]), &mut rows);
    }
    for j in 0..n {
        let row = (0..n).map(|i| (yi(i, j), 0, 1.0)).collect();
        push(row, 1.0, false, RowLabel::new(6, &[j]), &mut rows);
    }
    for j in 0..n {
        for i in 0..n {
            push(vec![(yi(i, j), 0, -1.0)], 0.0, true, RowLabel::new(7, &[i, j]), &mut rows);
        }
    }
    push(vec![(0, 0, 1.0)], 1.0, false, RowLabel::new(8, &[]), &mut rows);
    let tr = (0..nn).map(|p| (p + 1, p + 1, 1.0)).collect();
    push(tr, n as f64, false, RowLabel::new(9, &[]), &mut rows);

    let mut trip = Vec::new();
    for j1 in 0..n {
        for i1 in 0..n {
            let p = yi(i1, j1);
            for j2 in 0..n {
                for i2 in 0..n {
                    let qx = yi(i2, j2);
                    let v = q.d[(j1, j2)] * q.w[(i1, i2)];
                    if qx <= p && v != 0.0 {
                        trip.push((p, qx, -v));
                    }
                }
            }
        }
    }
    let cost = SparseSym::from_triplets(dim, trip);
    let cons = Constraints::Entries(EntryConstraints::from_rows(dim, rows));
    let mut prob = SdpProblem::new(cost, cons, DVector::from_vec(b), &ineq, 2.0)?;

    let inv_norms: Vec<f64> = prob.constraints.row_norms().iter().map(|&r| 1.0 / r).collect();
    prob.scale_rows(&inv_norms);
    let op = prob.constraints.operator_norm(1e-6, 10_000);
    prob.scale_rows(&vec![1.0 / op; prob.m()]);
    prob.scale_primal((1 + n) as f64);
    prob.normalize_cost();
    prob.sense = Sense::Minimize;
    prob.kind = ProblemKind::Qap { size: n };
    prob.labels = labels;
    Ok(prob)
}
