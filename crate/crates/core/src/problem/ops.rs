//! Operator representations for the cost matrix and the constraint map.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::symlin::{svec_index, svec_len};

/// Sparse symmetric matrix, both triangles stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from `(i, j, v)` entries of one triangle or both: an entry
    /// with `i ≠ j` sets both `(i, j)` and `(j, i)`. Duplicates are summed.
    pub fn from_triplets(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut map: HashMap<(usize, usize), f64> = HashMap::new();
        for (i, j, v) in entries {
            assert!(i < n && j < n, "entry ({i}, {j}) outside {n}x{n}");
            *map.entry((i, j)).or_insert(0.0) += v;
            if i != j {
                *map.entry((j, i)).or_insert(0.0) += v;
            }
        }
        let mut items: Vec<((usize, usize), f64)> =
            map.into_iter().filter(|&(_, v)| v != 0.0).collect();
        items.sort_by_key(|&(k, _)| k);
        let mut row_ptr = vec![0; n + 1];
        for &((i, _), _) in &items {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols: items.iter().map(|&((_, j), _)| j).collect(),
            vals: items.iter().map(|&(_, v)| v).collect(),
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self::from_triplets(
            n,
            (0..n)
                .flat_map(|j| (j..n).map(move |i| (i, j)))
                .map(|(i, j)| (i, j, a[(i, j)])),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.vals {
            *v *= s;
        }
    }

    /// `out ← M x`.
    pub fn matvec(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        for i in 0..self.n {
            out[i] = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `M V` for an `n × k` block.
    pub fn mul_block(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, v.ncols());
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                for c in 0..v.ncols() {
                    out[(i, c)] += a * v[(j, c)];
                }
            }
        }
        out
    }

    /// `Vᵀ M V`.
    pub fn compress(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mv = self.mul_block(v);
        let c = v.transpose() * mv;
        (&c + c.transpose()) * 0.5
    }

    /// `⟨M, X⟩` for dense symmetric `X`.
    pub fn inner_dense(&self, x: &DMatrix<f64>) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[(i, j)]).sum::<f64>())
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a[(i, j)] = v;
            }
        }
        a
    }
}

/// `𝒜X = diag(X)` with per-row weights: `Aᵢ = dᵢ eᵢeᵢᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalConstraints {
    pub weights: Vec<f64>,
}

/// Constraints given as sparse entry lists: `⟨Aᵢ, X⟩ = Σ coef · X[r, c]`
/// over the row's entries. An off-diagonal entry stands for `coef/2` at
/// both `(r, c)` and `(c, r)` in `Aᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryConstraints {
    n: usize,
    row_ptr: Vec<usize>,
    entries: Vec<(usize, usize, f64)>,
}

impl EntryConstraints {
    /// Each row is a list of `(r, c, coef)`; repeated positions are merged.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut entries = Vec::new();
        for row in rows {
            let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(row.len());
            for (r, c, v) in row {
                assert!(r < n && c < n, "entry ({r}, {c}) outside {n}x{n}");
                let (r, c) = if r >= c { (r, c) } else { (c, r) };
                match merged.iter_mut().find(|e| e.0 == r && e.1 == c) {
                    Some(e) => e.2 += v,
                    None => merged.push((r, c, v)),
                }
            }
            entries.extend(merged);
            row_ptr.push(entries.len());
        }
        Self {
            n,
            row_ptr,
            entries,
        }
    }

    fn row(&self, i: usize) -> &[(usize, usize, f64)] {
        &self.entries[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
}

/// The constraint operator `𝒜: 𝕊ⁿ → ℝᵐ` and its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraints {
    Diagonal(DiagonalConstraints),
    Entries(EntryConstraints),
}

impl Constraints {
    pub fn diagonal(n: usize) -> Self {
        Self::Diagonal(DiagonalConstraints {
            weights: vec![1.0; n],
        })
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.weights.len(),
            Self::Entries(e) => e.row_ptr.len() - 1,
        }
    }

    /// Row `i` holds `svec(Vᵀ Aᵢ V)`; shape `m × k(k+1)/2`.
    pub fn compress(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let k = v.ncols();
        let len = svec_len(k);
        let mut out = DMatrix::zeros(self.m(), len);
        let sqrt2 = std::f64::consts::SQRT_2;
        // svec of the symmetrized outer product ½(a bᵀ + b aᵀ), scaled.
        let mut add_outer = |row: usize, a: usize, b: usize, w: f64| {
            for q in 0..k {
                for p in q..k {
                    let val = 0.5 * (v[(a, p)] * v[(b, q)] + v[(b, p)] * v[(a, q)]);
                    let s = if p == q { 1.0 } else { sqrt2 };
                    out[(row, svec_index(k, p, q))] += w * s * val;
                }
            }
        };
        match self {
            Self::Diagonal(d) => {
                for (i, &w) in d.weights.iter().enumerate() {
                    add_outer(i, i, i, w);
                }
            }
            Self::Entries(e) => {
                for i in 0..self.m() {
                    for &(r, c, coef) in e.row(i) {
                        add_outer(i, r, c, coef);
                    }
                }
            }
        }
        out
    }

    /// `𝒜(V S Vᵀ)`.
    pub fn apply_lowrank(&self, v: &DMatrix<f64>, s: &DMatrix<f64>) -> DVector<f64> {
        let w = v * s;
        let entry = |r: usize, c: usize| w.row(r).dot(&v.row(c));
        match self {
            Self::Diagonal(d) => {
                DVector::from_iterator(d.weights.len(), d.weights.iter().enumerate().map(|(i, &wt)| wt * entry(i, i)))
            }
            Self::Entries(e) => DVector::from_iterator(
                self.m(),
                (0..self.m()).map(|i| e.row(i).iter().map(|&(r, c, coef)| coef * entry(r, c)).sum()),
            ),
        }
    }

    /// `𝒜X` for dense symmetric `X`.
    pub fn apply_dense(&self, x: &DMatrix<f64>) -> DVector<f64> {
        match self {
            Self::Diagonal(d) => DVector::from_iterator(
                d.weights.len(),
                d.weights.iter().enumerate().map(|(i, &w)| w * x[(i, i)]),
            ),
            Self::Entries(e) => DVector::from_iterator(
                self.m(),
                (0..self.m()).map(|i| e.row(i).iter().map(|&(r, c, coef)| coef * x[(r, c)]).sum()),
            ),
        }
    }

    /// `out += (𝒜*y) x`.
    pub fn adjoint_matvec_add(&self, y: &DVector<f64>, x: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Self::Diagonal(d) => {
                for (i, &w) in d.weights.iter().enumerate() {
                    out[i] += y[i] * w * x[i];
                }
            }
            Self::Entries(e) => {
                for i in 0..self.m() {
                    let yi = y[i];
                    if yi == 0.0 {
                        continue;
                    }
                    for &(r, c, coef) in e.row(i) {
                        if r == c {
                            out[r] += yi * coef * x[r];
                        } else {
                            let h = 0.5 * yi * coef;
                            out[r] += h * x[c];
                            out[c] += h * x[r];
                        }
                    }
                }
            }
        }
    }

    /// `Vᵀ (𝒜*y) V`.
    pub fn adjoint_inner_lowrank(&self, y: &DVector<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        let n = v.nrows();
        let mut av = DMatrix::zeros(n, v.ncols());
        let mut buf = DVector::zeros(n);
        for j in 0..v.ncols() {
            buf.fill(0.0);
            self.adjoint_matvec_add(y, &v.column(j).into_owned(), &mut buf);
            av.set_column(j, &buf);
        }
        let c = v.transpose() * av;
        (&c + c.transpose()) * 0.5
    }

    /// `𝒜*y` as a dense matrix.
    pub fn adjoint_dense(&self, y: &DVector<f64>, n: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        match self {
            Self::Diagonal(d) => {
                for (i, &w) in d.weights.iter().enumerate() {
                    a[(i, i)] += y[i] * w;
                }
            }
            Self::Entries(e) => {
                for i in 0..self.m() {
                    for &(r, c, coef) in e.row(i) {
                        if r == c {
                            a[(r, r)] += y[i] * coef;
                        } else {
                            a[(r, c)] += 0.5 * y[i] * coef;
                            a[(c, r)] += 0.5 * y[i] * coef;
                        }
                    }
                }
            }
        }
        a
    }

    /// Frobenius norm of every `Aᵢ`.
    pub fn row_norms(&self) -> Vec<f64> {
        match self {
            Self::Diagonal(d) => d.weights.iter().map(|w| w.abs()).collect(),
            Self::Entries(e) => (0..self.m())
                .map(|i| {
                    e.row(i)
                        .iter()
                        .map(|&(r, c, v)| if r == c { v * v } else { 0.5 * v * v })
                        .sum::<f64>()
                        .sqrt()
                })
                .collect(),
        }
    }

    /// `Aᵢ ← dᵢ Aᵢ`.
    pub fn scale_rows(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.m());
        match self {
            Self::Diagonal(diag) => {
                for (w, s) in diag.weights.iter_mut().zip(d) {
                    *w *= s;
                }
            }
            Self::Entries(e) => {
                for (i, &s) in d.iter().enumerate() {
                    let span = e.row_ptr[i]..e.row_ptr[i + 1];
                    for entry in &mut e.entries[span] {
                        entry.2 *= s;
                    }
                }
            }
        }
    }

    /// `𝒜𝒜* z`.
    pub fn gram_apply(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Diagonal(d) => DVector::from_iterator(
                d.weights.len(),
                d.weights.iter().enumerate().map(|(i, &w)| w * w * z[i]),
            ),
            Self::Entries(e) => {
                // Accumulate M = 𝒜*z on the union support, then apply 𝒜.
                let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
                for i in 0..self.m() {
                    for &(r, c, coef) in e.row(i) {
                        let w = if r == c { coef } else { 0.5 * coef };
                        *acc.entry((r, c)).or_insert(0.0) += z[i] * w;
                    }
                }
                DVector::from_iterator(
                    self.m(),
                    (0..self.m()).map(|i| {
                        e.row(i)
                            .iter()
                            .map(|&(r, c, coef)| coef * acc.get(&(r, c)).copied().unwrap_or(0.0))
                            .sum()
                    }),
                )
            }
        }
    }

    /// Estimates `‖𝒜‖_op` by power iteration on `𝒜𝒜*` to `rel_tol`.
    pub fn operator_norm(&self, rel_tol: f64, max_iters: usize) -> f64 {
        let m = self.m();
        if m == 0 {
            return 0.0;
        }
        // Deterministic, non-degenerate start.
        let mut z = DVector::from_fn(m, |i, _| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract());
        z /= z.norm();
        let mut lam = 0.0f64;
        for _ in 0..max_iters {
            let w = self.gram_apply(&z);
            let next = w.norm();
            if next == 0.0 {
                return 0.0;
            }
            z = w / next;
            if (next - lam).abs() <= rel_tol * next {
                lam = next;
                break;
            }
            lam = next;
        }
        lam.sqrt()
    }

    /// Dense `Aᵢ` matrices, for small-scale checks.
    pub fn dense_matrices(&self, n: usize) -> Vec<DMatrix<f64>> {
        (0..self.m())
            .map(|i| {
                let mut e = DVector::zeros(self.m());
                e[i] = 1.0;
                self.adjoint_dense(&e, n)
            })
            .collect()
    }

    pub(crate) fn dim_hint(&self) -> Option<usize> {
        match self {
            Self::Entries(e) => Some(e.n),
            Self::Diagonal(d) => Some(d.weights.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlin::svec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_entries(n: usize, rng: &mut ChaCha8Rng) -> Constraints {
        let rows = (0..7)
            .map(|_| {
                (0..3)
                    .map(|_| (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        Constraints::Entries(EntryConstraints::from_rows(n, rows))
    }

    #[test]
    fn compress_and_lowrank_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 6;
        let v = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let s0 = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let s = &s0 * s0.transpose();
        for cons in [Constraints::diagonal(n), sample_entries(n, &mut rng)] {
            let mats = cons.dense_matrices(n);
            let comp = cons.compress(&v);
            let x = &v * &s * v.transpose();
            let direct = cons.apply_dense(&x);
            let low = cons.apply_lowrank(&v, &s);
            assert!((&direct - &low).amax() < 1e-12);
            assert!((&comp * svec(&s).data - &direct).amax() < 1e-12);
            for (i, a) in mats.iter().enumerate() {
                let expect = svec(&(v.transpose() * a * &v));
                assert!((comp.row(i).transpose() - expect.data).amax() < 1e-12);
                assert!(((a * &x).trace() - direct[i]).abs() < 1e-12);
                assert!((a.norm() - cons.row_norms()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_consistency_and_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 5;
        for cons in [Constraints::diagonal(n), sample_entries(n, &mut rng)] {
            let m = cons.m();
            let y = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let dense = cons.adjoint_dense(&y, n);
            let mut out = DVector::zeros(n);
            cons.adjoint_matvec_add(&y, &x, &mut out);
            assert!((&dense * &x - out).amax() < 1e-12);

            let z = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let g = cons.gram_apply(&z);
            let expect = cons.apply_dense(&cons.adjoint_dense(&z, n));
            assert!((g - expect).amax() < 1e-12);

            let v = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
            let inner = cons.adjoint_inner_lowrank(&y, &v);
            assert!((inner - v.transpose() * &dense * &v).amax() < 1e-12);
        }
    }

    #[test]
    fn operator_norm_of_diagonal_is_max_weight() {
        let c = Constraints::Diagonal(DiagonalConstraints {
            weights: vec![0.5, 2.0, 1.0],
        });
        assert!((c.operator_norm(1e-10, 500) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn sparse_sym_basics() {
        let s = SparseSym::from_triplets(3, [(0, 1, 1.0), (1, 0, 1.0), (2, 2, -3.0)]);
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 2.0);
        assert_eq!(s.nnz(), 3);
        let d = s.to_dense();
        assert_eq!(SparseSym::from_dense(&d), s);
        assert!((s.frobenius_norm() - d.norm()).abs() < 1e-15);
    }
}
