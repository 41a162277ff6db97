//! Nyström sketch `P = X̄Ψ` of the aggregate primal matrix.
//!
//! The test matrix `Ψ ∈ ℝⁿˣʳ` has i.i.d. standard normal entries. Row `i`
//! is drawn from a ChaCha20 generator seeded with the sketch seed and set
//! to stream `i`, mapping uniform words to normals with the ziggurat
//! sampler of `rand_distr::StandardNormal`. Rows therefore depend only on
//! `(seed, i, r)`, so `Ψ` can be rebuilt at any size and on any platform.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::symlin::{cholesky, small_eigh};

/// Row `i` of the test matrix.
pub fn test_row(seed: u64, i: usize, r: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    (0..r).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn test_matrix(seed: u64, n: usize, r: usize) -> DMatrix<f64> {
    let mut psi = DMatrix::zeros(n, r);
    for i in 0..n {
        for (j, v) in test_row(seed, i, r).into_iter().enumerate() {
            psi[(i, j)] = v;
        }
    }
    psi
}

#[derive(Debug, Clone, PartialEq)]
pub struct NystromSketch {
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub p: DMatrix<f64>,
    psi: Option<DMatrix<f64>>,
}

impl NystromSketch {
    /// Sketch of `X̄ = 0`. With `store_psi` the test matrix is kept in
    /// memory; otherwise it is regenerated on every use.
    pub fn new(n: usize, r: usize, seed: u64, store_psi: bool) -> Result<Self> {
        if r == 0 || r > n {
            return Err(Error::InvalidConfig(format!("sketch rank {r} must lie in 1..={n}")));
        }
        Ok(Self {
            n,
            r,
            seed,
            p: DMatrix::zeros(n, r),
            psi: store_psi.then(|| test_matrix(seed, n, r)),
        })
    }

    /// Restores a sketch from a saved `P`.
    pub fn from_parts(seed: u64, p: DMatrix<f64>, store_psi: bool) -> Result<Self> {
        let mut s = Self::new(p.nrows(), p.ncols(), seed, store_psi)?;
        s.p = p;
        Ok(s)
    }

    pub fn psi(&self) -> DMatrix<f64> {
        match &self.psi {
            Some(p) => p.clone(),
            None => test_matrix(self.seed, self.n, self.r),
        }
    }

    pub fn stores_psi(&self) -> bool {
        self.psi.is_some()
    }

    /// `P ← ηP + W diag(λ) (WᵀΨ)` for `W = VQ` (`n × j`).
    pub fn update(&mut self, eta: f64, w: &DMatrix<f64>, lam: &DVector<f64>) -> Result<()> {
        if w.nrows() != self.n || w.ncols() != lam.len() {
            return Err(Error::Dimension(format!(
                "update factor is {}x{} with {} weights for a sketch of side {}",
                w.nrows(),
                w.ncols(),
                lam.len(),
                self.n
            )));
        }
        self.p *= eta;
        if w.ncols() > 0 {
            let wt_psi = w.tr_mul(&self.psi());
            let mut scaled = w.clone();
            for (j, &l) in lam.iter().enumerate() {
                scaled.column_mut(j).scale_mut(l);
            }
            self.p.gemm(1.0, &scaled, &wt_psi, 1.0);
        }
        Ok(())
    }

    /// Stabilized Nyström approximation `X̂ = UΛUᵀ ≈ P(ΨᵀP)⁺Pᵀ` with
    /// `U` orthonormal (`n × r`) and `Λ ≥ 0` descending.
    pub fn reconstruct(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (n, r) = (self.n, self.r);
        let pn = self.p.norm();
        if pn == 0.0 || !pn.is_finite() {
            return (DMatrix::identity(n, r), DVector::zeros(r));
        }
        let psi = self.psi();
        let sigma = (n as f64).sqrt() * f64::EPSILON * pn;
        let y = &self.p + &psi * sigma;
        let b = psi.tr_mul(&y);
        let b = (&b + b.transpose()) * 0.5;
        let e = match cholesky(&b) {
            Ok(l) => {
                // E = Y L⁻ᵀ, i.e. solve L Eᵀ = Yᵀ.
                let et = l
                    .solve_lower_triangular(&y.transpose())
                    .expect("Cholesky factor has a positive diagonal");
                et.transpose()
            }
            Err(_) => {
                let (theta, q) = small_eigh(&b);
                let cut = theta[0].abs() * 1e-12;
                let keep: Vec<usize> = (0..r).filter(|&i| theta[i] > cut).collect();
                let mut f = DMatrix::zeros(r, keep.len());
                for (c, &i) in keep.iter().enumerate() {
                    f.set_column(c, &(q.column(i) / theta[i].sqrt()));
                }
                &y * f
            }
        };
        let svd = e.svd(true, false);
        let u_full = svd.u.expect("requested U");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut u = DMatrix::zeros(n, r);
        let mut lam = DVector::zeros(r);
        for (c, &i) in order.iter().take(r).enumerate() {
            u.set_column(c, &u_full.column(i));
            let s = svd.singular_values[i];
            lam[c] = (s * s - sigma).max(0.0);
        }
        if order.len() < r {
            complete_basis(&mut u, order.len());
        }
        (u, lam)
    }
}

/// Fills columns `from..` of `u` with unit vectors orthogonal to the rest.
pub(crate) fn complete_basis(u: &mut DMatrix<f64>, from: usize) {
    let n = u.nrows();
    let mut c = from;
    for e in 0..n {
        if c == u.ncols() {
            break;
        }
        let mut v = DVector::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            let q = u.columns(0, c);
            let h = q.tr_mul(&v);
            v.gemv(-1.0, &q, &h, 1.0);
        }
        let nv = v.norm();
        if nv > 1e-8 {
            u.set_column(c, &(v / nv));
            c += 1;
        }
    }
}
