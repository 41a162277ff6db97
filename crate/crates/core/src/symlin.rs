//! Small dense symmetric linear algebra.
//!
//! `svec` packs the lower triangle column by column with off-diagonal
//! entries scaled by `√2`, so that `⟨A, B⟩ = svec(A)ᵀ svec(B)`. Everything
//! in this module works on matrices whose side is the bundle size `k`
//! (tens at most), so dense storage is used throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense symmetric `k × k` matrix. Only symmetric inputs are meaningful.
pub type SmallSym = DMatrix<f64>;

/// Side length of a triangular number `len = n(n+1)/2`, if there is one.
pub fn triangular_side(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (n * (n + 1) / 2 == len).then_some(n)
}

/// Length of `svec` for an `n × n` matrix.
pub const fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Symmetric vectorization of a matrix of side `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SVec {
    pub data: DVector<f64>,
    pub dim: usize,
}

impl SVec {
    pub fn zeros(dim: usize) -> Self {
        Self {
            data: DVector::zeros(svec_len(dim)),
            dim,
        }
    }

    pub fn from_vec(v: Vec<f64>) -> Result<Self> {
        let dim = triangular_side(v.len()).ok_or_else(|| {
            Error::Dimension(format!("svec length {} is not triangular", v.len()))
        })?;
        Ok(Self {
            data: DVector::from_vec(v),
            dim,
        })
    }

    /// `svec(I)`.
    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for j in 0..dim {
            s.data[svec_index(dim, j, j)] = 1.0;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dot(&self, other: &SVec) -> f64 {
        self.data.dot(&other.data)
    }
}

/// Position of entry `(i, j)` (either triangle) inside `svec` of side `n`.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    // Columns 0..c contribute n + (n-1) + ... + (n-c+1) entries.
    c * n - c * c.saturating_sub(1) / 2 + (r - c)
}

pub fn svec(a: &SmallSym) -> SVec {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        out.push(a[(j, j)]);
        for i in (j + 1)..n {
            out.push(std::f64::consts::SQRT_2 * a[(i, j)]);
        }
    }
    SVec {
        data: DVector::from_vec(out),
        dim: n,
    }
}

pub fn svec_inv(v: &SVec) -> Result<SmallSym> {
    let n = triangular_side(v.len())
        .ok_or_else(|| Error::Dimension(format!("svec length {} is not triangular", v.len())))?;
    let mut a = DMatrix::zeros(n, n);
    let mut p = 0;
    for j in 0..n {
        a[(j, j)] = v.data[p];
        p += 1;
        for i in (j + 1)..n {
            let x = v.data[p] / std::f64::consts::SQRT_2;
            a[(i, j)] = x;
            a[(j, i)] = x;
            p += 1;
        }
    }
    Ok(a)
}

/// The `n(n+1)/2 × n²` matrix taking `vec(A)` (column-major) to `svec(A)`.
pub fn u_matrix(n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(svec_len(n), n * n);
    for (row, entries) in svec_vec_support(n).into_iter().enumerate() {
        for (col, w) in entries {
            u[(row, col)] = w;
        }
    }
    u
}

/// Nonzeros of each row of `U`: `(vec column, weight)` pairs.
fn svec_vec_support(n: usize) -> Vec<Vec<(usize, f64)>> {
    let mut rows = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        rows.push(vec![(j + j * n, 1.0)]);
        for i in (j + 1)..n {
            let w = std::f64::consts::FRAC_1_SQRT_2;
            rows.push(vec![(i + j * n, w), (j + i * n, w)]);
        }
    }
    rows
}

/// Symmetric Kronecker product `G ⊗ₛ H = ½ U (G ⊗ H + H ⊗ G) Uᵀ`.
///
/// Each row of `U` has at most two nonzeros, so the product is evaluated
/// entrywise over that support instead of forming the `n² × n²` Kronecker
/// matrices.
pub fn symm_kron(g: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    if g.ncols() != n || h.nrows() != n || h.ncols() != n {
        return Err(Error::Dimension(format!(
            "symm_kron needs equal square factors, got {}x{} and {}x{}",
            g.nrows(),
            g.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let support = svec_vec_support(n);
    let len = svec_len(n);
    // (G ⊗ H)[vec(k,l), vec(k',l')] = G[l,l'] H[k,k'] for vec(k,l) = k + l n.
    let kron_sum = |a: usize, b: usize| {
        let (k, l) = (a % n, a / n);
        let (kp, lp) = (b % n, b / n);
        g[(l, lp)] * h[(k, kp)] + h[(l, lp)] * g[(k, kp)]
    };
    let mut out = DMatrix::zeros(len, len);
    for (r, row_r) in support.iter().enumerate() {
        for (s, row_s) in support.iter().enumerate() {
            let mut acc = 0.0;
            for &(a, wa) in row_r {
                for &(b, wb) in row_s {
                    acc += wa * wb * kron_sum(a, b);
                }
            }
            out[(r, s)] = 0.5 * acc;
        }
    }
    Ok(out)
}

/// Orthonormal basis for the span of `cols` (columns of an `n × p` matrix).
///
/// Modified Gram-Schmidt with column pivoting: the remaining column of
/// largest residual norm is taken next, ties to the lowest index. Columns
/// whose residual falls below `1e-12 ×` the largest input column norm are
/// dropped.
pub fn orthonormalize(cols: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cols.nrows();
    let p = cols.ncols();
    let max_norm = (0..p).map(|j| cols.column(j).norm()).fold(0.0, f64::max);
    if p == 0 || max_norm == 0.0 || !max_norm.is_finite() {
        return Err(Error::EmptyBasis);
    }
    let drop_tol = 1e-12 * max_norm;
    let mut work = cols.clone();
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p.min(n));
    while !remaining.is_empty() && basis.len() < n {
        let (pos, norm) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &j)| (pos, work.column(j).norm()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if norm <= drop_tol {
            break;
        }
        let j = remaining.remove(pos);
        let mut q: DVector<f64> = work.column(j).into_owned();
        // Second pass against the accepted basis.
        for b in &basis {
            let c = b.dot(&q);
            q.axpy(-c, b, 1.0);
        }
        let qn = q.norm();
        if qn <= drop_tol {
            continue;
        }
        q /= qn;
        for &r in &remaining {
            let c = q.dot(&work.column(r));
            let mut col = work.column_mut(r);
            col.axpy(-c, &q, 1.0);
        }
        basis.push(q);
    }
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    Ok(DMatrix::from_columns(&basis))
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
pub fn small_eigh(s: &SmallSym) -> (DVector<f64>, DMatrix<f64>) {
    let n = s.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = rhs` given the lower factor `L`.
pub fn cholesky_solve(l: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut z = rhs.clone();
    for i in 0..n {
        let mut v = z[i];
        for k in 0..i {
            v -= l[(i, k)] * z[k];
        }
        z[i] = v / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut v = z[i];
        for k in (i + 1)..n {
            v -= l[(k, i)] * z[k];
        }
        z[i] = v / l[(i, i)];
    }
    z
}

/// Solves `M x = rhs` for symmetric positive definite `M`.
///
/// Fails with [`Error::NotPositiveDefinite`] instead of regularizing.
pub fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if rhs.len() != m.nrows() {
        return Err(Error::Dimension(format!(
            "rhs length {} vs matrix side {}",
            rhs.len(),
            m.nrows()
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let l = cholesky(&sym)?;
    Ok(cholesky_solve(&l, rhs))
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let l = cholesky(m)?;
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        inv.set_column(j, &cholesky_solve(&l, &e));
    }
    Ok((&inv + inv.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    fn vec_col_major(a: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(a.len(), a.iter().copied())
    }

    #[test]
    fn svec_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let s = svec(&a);
        assert_eq!(s.data.as_slice(), &[1.0, 2.0 * 2f64.sqrt(), 3.0]);
        assert_eq!(svec(&DMatrix::identity(2, 2)).data.as_slice(), &[1.0, 0.0, 1.0]);
        assert!((svec(&DMatrix::identity(2, 2)).dot(&s) - 4.0).abs() < 1e-15);
        assert!((svec_inv(&s).unwrap() - &a).amax() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn round_trips_within_one_ulp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..8 {
            let v = SVec {
                data: DVector::from_fn(svec_len(n), |_, _| rng.random_range(-10.0..10.0)),
                dim: n,
            };
            let back = svec(&svec_inv(&v).unwrap());
            for (x, y) in v.data.iter().zip(back.data.iter()) {
                assert!((x - y).abs() <= x.abs() * f64::EPSILON);
            }
            let a = random_sym(n, &mut rng);
            let back = svec_inv(&svec(&a)).unwrap();
            for (x, y) in a.iter().zip(back.iter()) {
                assert!((x - y).abs() <= x.abs() * f64::EPSILON);
            }
        }
    }

    #[test]
    fn svec_index_matches_layout() {
        for n in 1..7 {
            let mut p = 0;
            for j in 0..n {
                for i in j..n {
                    assert_eq!(svec_index(n, i, j), p);
                    assert_eq!(svec_index(n, j, i), p);
                    p += 1;
                }
            }
        }
    }

    #[test]
    fn svec_inv_rejects_non_triangular() {
        let v = SVec {
            data: DVector::zeros(4),
            dim: 2,
        };
        assert!(matches!(svec_inv(&v), Err(Error::Dimension(_))));
        assert!(SVec::from_vec(vec![0.0; 5]).is_err());
        let z = svec_inv(&SVec::zeros(3)).unwrap();
        assert_eq!(z, DMatrix::zeros(3, 3));
    }

    #[test]
    fn u_matrix_two_matches_printed_table() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expect = DMatrix::from_row_slice(
            3,
            4,
            &[1.0, 0.0, 0.0, 0.0, 0.0, h, h, 0.0, 0.0, 0.0, 0.0, 1.0],
        );
        assert_eq!(u_matrix(2), expect);
    }

    #[test]
    fn u_matrix_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            let u = u_matrix(n);
            let uut = &u * u.transpose();
            assert!((uut - DMatrix::identity(svec_len(n), svec_len(n))).amax() < 1e-14);
            let a = random_sym(n, &mut rng);
            let back = u.transpose() * svec(&a).data;
            assert!((back - vec_col_major(&a)).amax() < 1e-14);
            assert!((&u * vec_col_major(&a) - svec(&a).data).amax() < 1e-14);
        }
    }

    #[test]
    fn isometry_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..9 {
            let a = random_sym(n, &mut rng);
            let b = random_sym(n, &mut rng);
            let lhs = svec(&a).dot(&svec(&b));
            let rhs = (&a * &b).trace();
            assert!((lhs - rhs).abs() <= 1e-12 * a.norm() * b.norm().max(1.0));
        }
    }

    #[test]
    fn symm_kron_identity_and_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let i4 = DMatrix::<f64>::identity(4, 4);
        let a = random_sym(4, &mut rng);
        let k = symm_kron(&i4, &i4).unwrap();
        assert!((&k * svec(&a).data - svec(&a).data).amax() < 1e-14);

        let g = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let h = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let k = symm_kron(&g, &h).unwrap();
        let direct = svec(&((&h * &a * g.transpose() + &g * &a * h.transpose()) * 0.5));
        assert!((&k * svec(&a).data - direct.data).amax() < 1e-12);

        // Same operator through the dense U formula.
        let u = u_matrix(4);
        let dense = (&u * (g.kronecker(&h) + h.kronecker(&g)) * u.transpose()) * 0.5;
        assert!((dense - &k).amax() < 1e-12);

        let gs = random_sym(4, &mut rng);
        let kg = symm_kron(&gs, &gs).unwrap();
        assert!((&kg - kg.transpose()).amax() < 1e-14);
    }

    #[test]
    fn symm_kron_size_mismatch() {
        let g = DMatrix::<f64>::identity(2, 2);
        let h = DMatrix::<f64>::identity(3, 3);
        assert!(symm_kron(&g, &h).is_err());
    }

    #[test]
    fn orthonormalize_cases() {
        let e = DMatrix::<f64>::identity(3, 2);
        assert_eq!(orthonormalize(&e).unwrap(), e);

        let mut dup = DMatrix::zeros(3, 2);
        dup[(1, 0)] = 1.0;
        dup[(1, 1)] = 1.0;
        assert_eq!(orthonormalize(&dup).unwrap().ncols(), 1);

        assert!(matches!(
            orthonormalize(&DMatrix::zeros(4, 2)),
            Err(Error::EmptyBasis)
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(100, 8, |_, _| rng.random_range(-1.0..1.0));
        let q = orthonormalize(&x).unwrap();
        assert_eq!(q.ncols(), 8);
        assert!((q.transpose() * &q - DMatrix::identity(8, 8)).amax() <= 1e-12);
        // span(x) ⊆ span(q)
        let resid = &x - &q * (q.transpose() * &x);
        assert!(resid.amax() < 1e-12);
    }

    #[test]
    fn small_eigh_cases() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let (l, q) = small_eigh(&d);
        assert_eq!(l.as_slice(), &[3.0, 1.0]);
        assert!((q.column(0).abs() - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-15);

        let (l, q) = small_eigh(&DMatrix::zeros(3, 3));
        assert!(l.amax() == 0.0);
        assert!((q.transpose() * &q - DMatrix::identity(3, 3)).amax() < 1e-15);

        // 2×2 analytic case: eigenvalues (a+c)/2 ± sqrt(((a-c)/2)² + b²).
        let (a, b, c) = (2.0, 0.5, -1.0);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let (l, _) = small_eigh(&m);
        let mid = (a + c) / 2.0;
        let rad = (((a - c) / 2.0f64).powi(2) + b * b).sqrt();
        assert!((l[0] - (mid + rad)).abs() < 1e-14);
        assert!((l[1] - (mid - rad)).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_sym(10, &mut rng);
        let (l, q) = small_eigh(&s);
        let recon = &q * DMatrix::from_diagonal(&l) * q.transpose();
        assert!((recon - &s).amax() <= 1e-12 * s.norm());
        assert!(l.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn solve_spd_cases() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let i = DMatrix::identity(3, 3);
        assert_eq!(solve_spd(&i, &b).unwrap(), b);
        assert!((solve_spd(&(i * 2.0), &b).unwrap() - &b / 2.0).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = DMatrix::from_fn(50, 50, |_, _| rng.random_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(50, 50) * 0.1;
        let rhs = DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
        let x = solve_spd(&m, &rhs).unwrap();
        assert!((&m * &x - &rhs).norm() <= 1e-10 * (m.norm() * x.norm() + rhs.norm()));

        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            solve_spd(&indef, &DVector::zeros(2)),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }
}
