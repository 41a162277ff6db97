//! Top eigenpairs of implicitly represented symmetric operators.
//!
//! Thick-restart Lanczos with full reorthogonalization inside the Krylov
//! block. After each cycle the leading Ritz vectors are kept and the
//! block is refilled from the residual direction. Small operators
//! (side at most the block size) are materialized and decomposed densely.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::symlin::small_eigh;

/// A symmetric linear operator known only through its action.
pub trait LinOp {
    fn dim(&self) -> usize;

    /// `out ← M x`.
    fn apply(&self, x: &DVector<f64>, out: &mut DVector<f64>);

    /// `M X` for a block of column vectors.
    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        let mut buf = DVector::zeros(x.nrows());
        for j in 0..x.ncols() {
            self.apply(&x.column(j).into_owned(), &mut buf);
            out.set_column(j, &buf);
        }
        out
    }
}

impl LinOp for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        self.mul_to(x, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosConfig {
    /// Krylov block size per cycle.
    pub inner_iters: usize,
    pub max_restarts: usize,
    /// Relative residual tolerance: pairs are accepted once
    /// `‖Mv − λv‖ ≤ tol · max(1, |λ₁|)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            inner_iters: 32,
            max_restarts: 10,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Descending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Restarts performed (0 when the first cycle sufficed).
    pub restarts: usize,
    pub converged: bool,
    /// Leading Ritz value after each cycle.
    pub leading_history: Vec<f64>,
}

impl EigResult {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let nv = v.norm();
    v / nv
}

/// Orthogonalizes `w` against the first `upto` columns of `basis`, twice.
/// Returns the accumulated projection coefficients.
fn reorthogonalize(basis: &DMatrix<f64>, upto: usize, w: &mut DVector<f64>) -> DVector<f64> {
    let q = basis.columns(0, upto);
    let mut h = q.tr_mul(w);
    w.gemv(-1.0, &q, &h, 1.0);
    let h2 = q.tr_mul(w);
    w.gemv(-1.0, &q, &h2, 1.0);
    h += h2;
    h
}

fn dense_top<O: LinOp + ?Sized>(op: &O, k: usize) -> Result<EigResult> {
    let n = op.dim();
    let m = op.apply_block(&DMatrix::identity(n, n));
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("operator application"));
    }
    let (vals, vecs) = small_eigh(&m);
    let k = k.min(n);
    let eigenvalues = vals.rows(0, k).into_owned();
    let eigenvectors = vecs.columns(0, k).into_owned();
    let resid = &m * &eigenvectors - &eigenvectors * DMatrix::from_diagonal(&eigenvalues);
    let residuals = (0..k).map(|j| resid.column(j).norm()).collect();
    Ok(EigResult {
        leading_history: vec![eigenvalues[0]],
        eigenvalues,
        eigenvectors,
        residuals,
        restarts: 0,
        converged: true,
    })
}

/// The `k` algebraically largest eigenpairs of `op`.
///
/// When the restart budget runs out before every pair meets the tolerance
/// the best Ritz pairs are returned with `converged = false`.
pub fn lanczos_top<O: LinOp + ?Sized>(op: &O, k: usize, cfg: &LanczosConfig) -> Result<EigResult> {
    let n = op.dim();
    if k == 0 {
        return Err(Error::Dimension("requested zero eigenpairs".into()));
    }
    if n == 0 {
        return Err(Error::Dimension("operator of dimension zero".into()));
    }
    let m = cfg.inner_iters;
    if k >= n || n <= m || k >= m {
        return dense_top(op, k);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut basis = DMatrix::<f64>::zeros(n, m);
    let mut t = DMatrix::<f64>::zeros(m, m);
    basis.set_column(0, &random_unit(n, &mut rng));
    let mut kept = 0usize;
    let mut history = Vec::new();
    let mut w = DVector::zeros(n);
    // Kept block size on restart: the wanted pairs plus half of the rest.
    let keep = (k + (m - k) / 2).min(m - 1);

    for cycle in 0..=cfg.max_restarts {
        let mut residual = DVector::zeros(n);
        let mut beta_last = 0.0;
        for j in kept..m {
            op.apply(&basis.column(j).into_owned(), &mut w);
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("operator application"));
            }
            let h = reorthogonalize(&basis, j + 1, &mut w);
            for i in 0..=j {
                t[(i, j)] = h[i];
                t[(j, i)] = h[i];
            }
            let beta = w.norm();
            if j + 1 < m {
                let scale = h.amax().max(1e-300);
                if beta <= 1e-12 * scale {
                    // Invariant subspace: continue with a fresh direction.
                    let mut fresh = random_unit(n, &mut rng);
                    reorthogonalize(&basis, j + 1, &mut fresh);
                    let nf = fresh.norm();
                    basis.set_column(j + 1, &(fresh / nf));
                    t[(j + 1, j)] = 0.0;
                    t[(j, j + 1)] = 0.0;
                } else {
                    basis.set_column(j + 1, &(&w / beta));
                    t[(j + 1, j)] = beta;
                    t[(j, j + 1)] = beta;
                }
            } else {
                residual.copy_from(&w);
                beta_last = beta;
            }
        }

        let (theta, y) = small_eigh(&t);
        history.push(theta[0]);
        let scale = theta[0].abs().max(1.0);
        let residuals: Vec<f64> = (0..k).map(|i| beta_last * y[(m - 1, i)].abs()).collect();
        let converged = residuals.iter().all(|&r| r <= cfg.tol * scale);
        if converged || cycle == cfg.max_restarts {
            let vecs = &basis * y.columns(0, k);
            return Ok(EigResult {
                eigenvalues: theta.rows(0, k).into_owned(),
                eigenvectors: vecs,
                residuals,
                restarts: cycle,
                converged,
                leading_history: history,
            });
        }

        // Thick restart: rotate the kept Ritz vectors to the front.
        let ritz = &basis * y.columns(0, keep);
        basis.columns_mut(0, keep).copy_from(&ritz);
        t.fill(0.0);
        for i in 0..keep {
            t[(i, i)] = theta[i];
        }
        let next = if beta_last > 1e-12 * scale {
            residual / beta_last
        } else {
            random_unit(n, &mut rng)
        };
        let mut next = next;
        reorthogonalize(&basis, keep, &mut next);
        let nn = next.norm();
        basis.set_column(keep, &(next / nn));
        kept = keep;
    }
    unreachable!("the final cycle always returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlin::small_eigh;
    use rand::Rng;

    fn random_sym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn diagonal_top_pair() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0, 1.0, 1.0]));
        let r = lanczos_top(&m, 1, &LanczosConfig::default()).unwrap();
        assert!((r.lambda_max() - 5.0).abs() < 1e-12);
        assert!((r.eigenvectors[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_laplacian() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        let r = lanczos_top(&l, 1, &LanczosConfig::default()).unwrap();
        assert!((r.lambda_max() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_on_random_matrix() {
        let a = random_sym(200, 11);
        let cfg = LanczosConfig {
            seed: 3,
            ..Default::default()
        };
        let r = lanczos_top(&a, 5, &cfg).unwrap();
        let (vals, _) = small_eigh(&a);
        for i in 0..5 {
            assert!((r.eigenvalues[i] - vals[i]).abs() < 1e-8, "pair {i}");
        }
        let q = &r.eigenvectors;
        assert!((q.transpose() * q - DMatrix::identity(5, 5)).amax() < 1e-10);
        assert!(r.leading_history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = random_sym(120, 5);
        let cfg = LanczosConfig {
            seed: 9,
            ..Default::default()
        };
        let r1 = lanczos_top(&a, 3, &cfg).unwrap();
        let r2 = lanczos_top(&a, 3, &cfg).unwrap();
        assert_eq!(r1.eigenvalues, r2.eigenvalues);
        assert_eq!(r1.eigenvectors, r2.eigenvectors);
    }

    #[test]
    fn sign_of_negative_definite_operator() {
        let a = random_sym(80, 6);
        let shifted = &a - DMatrix::identity(80, 80) * 50.0;
        let r = lanczos_top(&shifted, 1, &LanczosConfig::default()).unwrap();
        assert!(r.lambda_max() < 0.0);
        let (vals, _) = small_eigh(&shifted);
        assert!((r.lambda_max() - vals[0]).abs() < 1e-8);
    }

    #[test]
    fn too_many_pairs_falls_back_to_dense() {
        let a = random_sym(6, 7);
        let r = lanczos_top(&a, 10, &LanczosConfig::default()).unwrap();
        assert_eq!(r.eigenvalues.len(), 6);
    }

    struct Broken;
    impl LinOp for Broken {
        fn dim(&self) -> usize {
            100
        }
        fn apply(&self, _x: &DVector<f64>, out: &mut DVector<f64>) {
            out.fill(f64::NAN);
        }
    }

    #[test]
    fn non_finite_matvec_is_an_error() {
        assert!(matches!(
            lanczos_top(&Broken, 1, &LanczosConfig::default()),
            Err(Error::NonFinite(_))
        ));
    }
}
