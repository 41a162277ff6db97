//! Rounding of low-rank primal factors to combinatorial solutions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{qap_primal_index, GraphInstance, QapInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub x: Vec<i8>,
    /// `¼ xᵀLx`.
    pub value: f64,
}

fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Best of the cuts `sgn(uⱼ)` over the columns of `u` (`sgn(0) = +1`).
pub fn maxcut_round(u: &DMatrix<f64>, g: &GraphInstance) -> Result<CutResult> {
    if u.ncols() == 0 || u.nrows() != g.n {
        return Err(Error::Dimension(format!("factor is {}x{} for a graph on {} vertices", u.nrows(), u.ncols(), g.n)));
    }
    let mut best: Option<CutResult> = None;
    for col in u.column_iter() {
        let x: Vec<i8> = col.iter().map(|&v| sign(v)).collect();
        let value = g.cut_value(&x);
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(CutResult { x, value });
        }
    }
    Ok(best.expect("at least one column"))
}

/// Minimum-cost assignment: `π` minimizing `Σᵢ cost[i, π(i)]`.
///
/// Shortest augmenting paths with row and column potentials, `O(n³)`.
/// Ties go to the lowest column index.
pub fn hungarian(cost: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::Dimension(format!("cost matrix is {}x{}, not square", n, cost.ncols())));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment costs"));
    }
    // 1-based arrays; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    Ok(perm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermResult {
    /// `perm[a]` is the location of facility `a`.
    pub perm: Vec<usize>,
    /// `tr(WΠDΠᵀ)`.
    pub objective: f64,
    /// `(objective − optimum)/|optimum|` when the optimum is known.
    pub relative_gap: Option<f64>,
}

pub fn relative_gap(objective: f64, optimum: f64) -> f64 {
    if optimum == 0.0 {
        if objective == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (objective - optimum) / optimum.abs()
    }
}

/// Rounds each column of `u` (side `n² + 1`): the trailing `n²` entries
/// form `B[i, j] = u[1 + j·n + i]`, which is projected to the permutation
/// maximizing `⟨B, Π⟩`. Both signs of each column are tried, since
/// eigenvectors carry no sign. Returns the permutation of least objective.
pub fn qap_round(u: &DMatrix<f64>, q: &QapInstance) -> Result<PermResult> {
    let n = q.size;
    if u.nrows() != n * n + 1 || u.ncols() == 0 {
        return Err(Error::Dimension(format!("factor has {} rows, expected {}", u.nrows(), n * n + 1)));
    }
    let mut best: Option<PermResult> = None;
    for col in u.column_iter() {
        let b = DMatrix::from_fn(n, n, |i, j| col[qap_primal_index(n, i, j)]);
        for sgn in [1.0, -1.0] {
            let perm = hungarian(&(&b * -sgn))?;
            let objective = q.objective(&perm);
            if best.as_ref().is_none_or(|p| objective < p.objective) {
                best = Some(PermResult {
                    perm,
                    objective,
                    relative_gap: q.known_optimum.map(|o| relative_gap(objective, o)),
                });
            }
        }
    }
    Ok(best.expect("at least one column"))
}

/// Running minimum of relative gaps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BestGap {
    best: Option<f64>,
}

impl BestGap {
    pub fn push(&mut self, gap: f64) {
        if self.best.is_none_or(|b| gap < b) {
            self.best = Some(gap);
        }
    }

    pub fn observe(&mut self, r: &PermResult) {
        if let Some(g) = r.relative_gap {
            self.push(g);
        }
    }

    /// `None` before any gap was seen.
    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

/// `(1, vec(Π))` for a permutation, the rank-one primal factor of its lift.
pub fn perm_vector(perm: &[usize]) -> DVector<f64> {
    let n = perm.len();
    let mut x = DVector::zeros(n * n + 1);
    x[0] = 1.0;
    for (i, &j) in perm.iter().enumerate() {
        x[qap_primal_index(n, i, j)] = 1.0;
    }
    x
}
