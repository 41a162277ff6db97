//! The proximal spectral bundle loop.
//!
//! Each iteration maximizes the proximal model objective over the spectral
//! set `𝒳̂_t = {ηX̄ + VSVᵀ}`, forms the candidate `ỹ`, evaluates the
//! penalized dual there and either moves the center (descent step) or
//! keeps it (null step). The model is refreshed after every iteration.

mod state;

pub use state::{fingerprint, load_state, read_state, save_state, warm_start_pad, write_state, Fingerprint};

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::eigsolve::{lanczos_top, LanczosConfig};
use crate::error::{Error, Result};
use crate::problem::SdpProblem;
use crate::sketch::{complete_basis, NystromSketch};
use crate::subqp::{alternating_max, ipm_eval, AltMaxOptions, IpmState, ModelData, ModelPoint};
use crate::symlin::{orthonormalize, small_eigh, svec};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rho: f64,
    pub beta: f64,
    /// Eigenvectors of the slack matrix added to the basis per iteration.
    pub k_c: usize,
    /// Leading directions of the previous solution kept in the basis.
    pub k_p: usize,
    pub eps: f64,
    /// Nyström sketch rank; `0` keeps `X̄` as a dense matrix.
    pub sketch_rank: usize,
    pub max_iters: usize,
    pub max_time: Option<Duration>,
    pub seed: u64,
    pub lanczos: LanczosConfig,
    /// Also require `‖𝒜X − proj_𝒦(𝒜X)‖_∞ ≤ ε` for convergence.
    pub linf_check: bool,
    pub subproblem: AltMaxOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 0.01,
            beta: 0.25,
            k_c: 10,
            k_p: 1,
            eps: 1e-3,
            sketch_rank: 0,
            max_iters: 1000,
            max_time: None,
            seed: 0,
            lanczos: LanczosConfig::default(),
            linf_check: false,
            subproblem: AltMaxOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn maxcut() -> Self {
        Self {
            sketch_rank: 10,
            ..Self::default()
        }
    }

    pub fn qap(size: usize) -> Self {
        Self {
            rho: 0.005,
            k_c: 2,
            k_p: 0,
            sketch_rank: size.max(1),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if self.k_c == 0 {
            return bad("k_c must be at least 1".into());
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        Ok(())
    }

    /// `(k_c, k_p)` clamped so that `k_c + k_p ≤ n`.
    pub fn ranks(&self, n: usize) -> (usize, usize) {
        let kc = self.k_c.min(n);
        (kc, self.k_p.min(n - kc))
    }
}

/// Storage of the aggregate primal matrix `X̄`.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimalStore {
    Explicit(DMatrix<f64>),
    Sketch(NystromSketch),
}

/// Spectral model `𝒳̂ = {ηX̄ + VSVᵀ : η ≥ 0, S ⪰ 0, η·tr(X̄) + tr(S) ≤ α}`.
///
/// `X̄` enters only through `tr(X̄)`, `⟨C, X̄⟩` and `𝒜X̄`. The leading part
/// `W Λ Wᵀ` of the last subproblem solution, which moves into `V` rather
/// than `X̄`, is kept so that the last primal iterate can be rebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleModel {
    pub v: DMatrix<f64>,
    pub tr_xbar: f64,
    pub c_xbar: f64,
    pub a_xbar: DVector<f64>,
    pub store: PrimalStore,
    pub k_c: usize,
    pub k_p: usize,
    pub top_w: DMatrix<f64>,
    pub top_lam: DVector<f64>,
}

fn with_columns(q: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = q.nrows();
    let keep = q.ncols().min(k);
    let mut u = DMatrix::zeros(n, k);
    u.columns_mut(0, keep).copy_from(&q.columns(0, keep));
    if keep < k {
        complete_basis(&mut u, keep);
    }
    u
}

fn scaled_columns(u: &DMatrix<f64>, lam: &DVector<f64>) -> DMatrix<f64> {
    let mut f = u.clone();
    for (j, &l) in lam.iter().enumerate() {
        f.column_mut(j).scale_mut(l);
    }
    f
}

/// Eigenpairs of `F Fᵀ` with positive eigenvalues, descending.
fn factor_eig(f: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = f.nrows();
    if f.ncols() == 0 || f.norm() == 0.0 {
        return (DMatrix::identity(n, 1), DVector::zeros(1));
    }
    let qr = f.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let (vals, vecs) = small_eigh(&(&r * r.transpose()));
    positive_part(&(q * vecs), &vals)
}

fn positive_part(u: &DMatrix<f64>, vals: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let top = vals.max().max(0.0);
    let keep = vals.iter().take_while(|&&v| v > 1e-12 * top && v > 0.0).count().max(1);
    (u.columns(0, keep).into_owned(), vals.rows(0, keep).map(|v| v.max(0.0)))
}

impl BundleModel {
    /// Empty aggregate with basis `v`.
    pub fn new(v: DMatrix<f64>, m: usize, k_c: usize, k_p: usize, store: PrimalStore) -> Self {
        let n = v.nrows();
        Self {
            v,
            tr_xbar: 0.0,
            c_xbar: 0.0,
            a_xbar: DVector::zeros(m),
            store,
            k_c,
            k_p,
            top_w: DMatrix::zeros(n, 0),
            top_lam: DVector::zeros(0),
        }
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn k(&self) -> usize {
        self.v.ncols()
    }

    pub fn data(&self, prob: &SdpProblem) -> ModelData {
        ModelData {
            alpha: prob.alpha,
            compressed: prob.constraints.compress(&self.v),
            cvv: svec(&prob.cost.compress(&self.v)).data,
            a_xbar: self.a_xbar.clone(),
            c_xbar: self.c_xbar,
            tr_xbar: self.tr_xbar,
        }
    }

    /// `f̂(y) = max_{X ∈ 𝒳̂} ⟨C − 𝒜*y, X⟩ + ⟨b, y⟩`.
    pub fn value(&self, prob: &SdpProblem, y: &DVector<f64>, opts: &crate::subqp::IpmOptions) -> Result<f64> {
        model_value(&self.data(prob), &prob.b, y, opts)
    }

    /// Splits `S` into its leading `k_p` eigenpairs, which stay in the
    /// basis, and the rest, which is folded into `X̄ ← ηX̄ + V Q Λ Qᵀ Vᵀ`.
    /// The new basis spans the kept directions and `new_vecs`.
    pub fn update(&mut self, md: &ModelData, point: &ModelPoint, new_vecs: &DMatrix<f64>) -> Result<()> {
        let k = self.k();
        let (lam, q) = small_eigh(&point.s);
        let kp = self.k_p.min(k);
        let q_p = q.columns(0, kp).into_owned();
        let lam_p = lam.rows(0, kp).map(|v| v.max(0.0));
        let q_c = q.columns(kp, k - kp).into_owned();
        let lam_c = lam.rows(kp, k - kp).map(|v| v.max(0.0));
        let sc = &q_c * DMatrix::from_diagonal(&lam_c) * q_c.transpose();
        let svc = svec(&sc).data;
        let eta = point.eta;
        self.tr_xbar = eta * self.tr_xbar + lam_c.sum();
        self.c_xbar = eta * self.c_xbar + md.cvv.dot(&svc);
        self.a_xbar = &self.a_xbar * eta + &md.compressed * &svc;
        let w_c = &self.v * &q_c;
        match &mut self.store {
            PrimalStore::Explicit(x) => {
                *x *= eta;
                x.gemm(1.0, &scaled_columns(&w_c, &lam_c), &w_c.transpose(), 1.0);
            }
            PrimalStore::Sketch(s) => s.update(eta, &w_c, &lam_c)?,
        }
        self.top_w = &self.v * q_p;
        self.top_lam = lam_p;
        let target = self.k_c + self.k_p;
        self.v = if self.k_p == 0 {
            with_columns(new_vecs, target)
        } else {
            let mut cols = DMatrix::zeros(self.n(), kp + new_vecs.ncols());
            cols.columns_mut(0, kp).copy_from(&self.top_w);
            cols.columns_mut(kp, new_vecs.ncols()).copy_from(new_vecs);
            with_columns(&orthonormalize(&cols)?, target)
        };
        Ok(())
    }

    /// Low-rank factorization `X̄ ≈ UΛUᵀ`.
    pub fn xbar_factor(&self) -> (DMatrix<f64>, DVector<f64>) {
        match &self.store {
            PrimalStore::Explicit(x) => {
                let (vals, vecs) = small_eigh(x);
                positive_part(&vecs, &vals)
            }
            PrimalStore::Sketch(s) => {
                let (u, lam) = s.reconstruct();
                positive_part(&u, &lam)
            }
        }
    }

    /// Low-rank factorization `UΛUᵀ` of the last primal iterate
    /// `X̄ + WΛ_WWᵀ`, eigenvalues descending.
    pub fn primal_factor(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (u, lam) = self.xbar_factor();
        let f1 = scaled_columns(&u, &lam.map(f64::sqrt));
        let f2 = scaled_columns(&self.top_w, &self.top_lam.map(f64::sqrt));
        let mut f = DMatrix::zeros(self.n(), f1.ncols() + f2.ncols());
        f.columns_mut(0, f1.ncols()).copy_from(&f1);
        f.columns_mut(f1.ncols(), f2.ncols()).copy_from(&f2);
        factor_eig(&f)
    }

    /// Dense `X̄` (explicit storage only).
    pub fn xbar_dense(&self) -> Option<&DMatrix<f64>> {
        match &self.store {
            PrimalStore::Explicit(x) => Some(x),
            PrimalStore::Sketch(_) => None,
        }
    }

    /// Replaces `X̄` by `UΛUᵀ`, recomputing statistics and storage.
    fn set_xbar(&mut self, prob: &SdpProblem, u: &DMatrix<f64>, lam: &DVector<f64>, store: PrimalStore) -> Result<()> {
        self.tr_xbar = lam.sum();
        let cu = prob.cost.compress(u);
        self.c_xbar = (0..lam.len()).map(|i| lam[i] * cu[(i, i)]).sum();
        self.a_xbar = prob.constraints.apply_lowrank(u, &DMatrix::from_diagonal(lam));
        self.store = store;
        match &mut self.store {
            PrimalStore::Explicit(x) => {
                *x = scaled_columns(u, lam) * u.transpose();
            }
            PrimalStore::Sketch(s) => {
                s.p.fill(0.0);
                s.update(0.0, u, lam)?;
            }
        }
        Ok(())
    }

    /// Adjusts the basis to `k_c + k_p` columns.
    fn set_ranks(&mut self, k_c: usize, k_p: usize) {
        self.k_c = k_c;
        self.k_p = k_p;
        if self.k() != k_c + k_p {
            self.v = with_columns(&self.v, k_c + k_p);
        }
    }
}

fn empty_store(n: usize, cfg: &SolverConfig) -> Result<PrimalStore> {
    Ok(if cfg.sketch_rank == 0 {
        PrimalStore::Explicit(DMatrix::zeros(n, n))
    } else {
        let r = cfg.sketch_rank.min(n);
        PrimalStore::Sketch(NystromSketch::new(n, r, cfg.seed, n * r <= 1 << 22)?)
    })
}

fn model_value(md: &ModelData, b: &DVector<f64>, y: &DVector<f64>, opts: &crate::subqp::IpmOptions) -> Result<f64> {
    let sol = ipm_eval(&md.eval_coeffs(y), opts)?;
    Ok(-sol.value + b.dot(y))
}

/// `f(y)` with the leading eigenpairs of `C − 𝒜*y`.
#[derive(Debug, Clone)]
pub struct Penalized {
    /// `+∞` when `y` violates `y_ℐ ≥ 0`.
    pub f: f64,
    pub lambda_max: f64,
    pub vecs: DMatrix<f64>,
}

/// `f(y) = α·[λ_max(C − 𝒜*y)]₊ + ⟨b, y⟩`.
pub fn penalized_obj(prob: &SdpProblem, y: &DVector<f64>, k: usize, cfg: &LanczosConfig) -> Result<Penalized> {
    if y.len() != prob.m() {
        return Err(Error::Dimension(format!("y has length {}, expected {}", y.len(), prob.m())));
    }
    if (0..y.len()).any(|i| prob.is_ineq(i) && y[i] < 0.0) {
        return Ok(Penalized {
            f: f64::INFINITY,
            lambda_max: f64::NAN,
            vecs: DMatrix::zeros(prob.n, 0),
        });
    }
    let eig = lanczos_top(&prob.slack_op(y), k.max(1), cfg)?;
    let lambda_max = eig.lambda_max();
    Ok(Penalized {
        f: prob.alpha * lambda_max.max(0.0) + prob.b.dot(y),
        lambda_max,
        vecs: eig.eigenvectors,
    })
}

/// `ỹ = y − (b − ν − 𝒜X)/ρ`. Rows of `ℐ` where `ν` is active are set to
/// exactly zero, which is their value in exact arithmetic.
pub fn candidate_iterate(
    ineq: &[bool],
    y: &DVector<f64>,
    nu: &DVector<f64>,
    ax: &DVector<f64>,
    b: &DVector<f64>,
    rho: f64,
) -> DVector<f64> {
    let mut yc = y - (b - nu - ax) / rho;
    for (i, &is_ineq) in ineq.iter().enumerate() {
        if is_ineq {
            yc[i] = if nu[i] > 0.0 { 0.0 } else { yc[i].max(0.0) };
        }
    }
    yc
}

/// Accept the candidate iff `β(f(y) − f̂(ỹ)) ≤ f(y) − f(ỹ)`.
pub fn descent_test(f_y: f64, f_cand: f64, model_val: f64, beta: f64) -> bool {
    beta * (f_y - model_val) <= f_y - f_cand
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `|f(y) − ⟨C,X⟩| / (1 + |⟨C,X⟩|)`; `f(y)` bounds the optimum above.
    pub rel_subopt: f64,
    /// `‖𝒜X − proj_𝒦(𝒜X)‖ / (1 + ‖b‖)`.
    pub rel_infeas: f64,
    pub linf_infeas: f64,
    /// `|⟨b,y⟩ − ⟨C,X⟩|`.
    pub dual_gap: f64,
    /// `λ_max(C − 𝒜*y)`.
    pub dual_feas: f64,
}

impl Residuals {
    pub fn converged(&self, eps: f64, linf: bool) -> bool {
        self.rel_subopt <= eps && self.rel_infeas <= eps && self.dual_feas <= eps && (!linf || self.linf_infeas <= eps)
    }
}

/// Residuals of `(X, y)` from the tracked statistics `𝒜X`, `⟨C,X⟩`.
pub fn compute_residuals(
    prob: &SdpProblem,
    y: &DVector<f64>,
    f_y: f64,
    lambda_y: f64,
    ax: &DVector<f64>,
    cx: f64,
) -> Residuals {
    let viol = ax - prob.proj_k(ax);
    Residuals {
        rel_subopt: (f_y - cx).abs() / (1.0 + cx.abs()),
        rel_infeas: viol.norm() / (1.0 + prob.b.norm()),
        linf_infeas: viol.amax(),
        dual_gap: (prob.b.dot(y) - cx).abs(),
        dual_feas: lambda_y,
    }
}

/// Statistics of the last primal iterate `X_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStats {
    pub ax: DVector<f64>,
    pub cx: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub y: DVector<f64>,
    pub nu: DVector<f64>,
    pub f_y: f64,
    pub lambda_y: f64,
    pub iters: usize,
    pub descent_steps: usize,
    pub null_steps: usize,
    pub converged: bool,
    pub model: BundleModel,
    pub last: Option<PointStats>,
    pub residuals: Option<Residuals>,
    pub ipm: Option<IpmState>,
    /// Scaling of the problem the state belongs to.
    pub scale_c: f64,
    pub scale_x: f64,
    pub row_scale: Vec<f64>,
}

impl SolverState {
    /// `y₀ = 0`, `ν₀ = 0`, `X̄₀ = 0` and `V₀` the leading eigenvectors of `C`.
    pub fn cold(prob: &SdpProblem, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let (kc, kp) = cfg.ranks(prob.n);
        let m = prob.m();
        let y = DVector::zeros(m);
        let pen = penalized_obj(prob, &y, kc + kp, &lanczos_cfg(cfg, u64::MAX))?;
        let v = with_columns(&pen.vecs, kc + kp);
        Ok(Self {
            y,
            nu: DVector::zeros(m),
            f_y: pen.f,
            lambda_y: pen.lambda_max,
            iters: 0,
            descent_steps: 0,
            null_steps: 0,
            converged: false,
            model: BundleModel::new(v, m, kc, kp, empty_store(prob.n, cfg)?),
            last: None,
            residuals: None,
            ipm: None,
            scale_c: prob.scale_c,
            scale_x: prob.scale_x,
            row_scale: prob.row_scale.clone(),
        })
    }

    /// `⟨C, X⟩` of the last primal iterate in original units.
    pub fn primal_objective(&self, prob: &SdpProblem) -> Option<f64> {
        self.last.as_ref().map(|p| prob.original_objective(p.cx))
    }

    /// `UΛUᵀ` approximating the last primal iterate in original units.
    pub fn primal_factor(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (u, lam) = self.model.primal_factor();
        (u, lam * self.scale_x)
    }
}

fn lanczos_cfg(cfg: &SolverConfig, iter: u64) -> LanczosConfig {
    LanczosConfig {
        seed: cfg.seed ^ cfg.lanczos.seed ^ iter.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ..cfg.lanczos
    }
}

/// What the observer sees after each iteration.
pub struct IterRecord<'a> {
    pub iter: usize,
    pub elapsed: Duration,
    pub f_y: f64,
    pub f_cand: f64,
    pub model_val: f64,
    pub descent: bool,
    pub residuals: Residuals,
    pub y: &'a DVector<f64>,
    pub y_cand: &'a DVector<f64>,
    pub nu: &'a DVector<f64>,
    pub point: &'a ModelPoint,
    pub model: &'a BundleModel,
    pub alt_passes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub state: SolverState,
    pub status: Status,
}

pub fn usbs_solve(prob: &SdpProblem, cfg: &SolverConfig, init: Option<SolverState>) -> Result<SolveOutput> {
    usbs_solve_with(prob, cfg, init, |_| {})
}

/// Runs the bundle method from `init` (or a cold start), calling
/// `observer` after every iteration.
pub fn usbs_solve_with(
    prob: &SdpProblem,
    cfg: &SolverConfig,
    init: Option<SolverState>,
    mut observer: impl FnMut(&IterRecord),
) -> Result<SolveOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let kc = cfg.ranks(prob.n).0;
    let mut st = match init {
        None => SolverState::cold(prob, cfg)?,
        Some(s) => prepare_init(prob, cfg, s)?,
    };
    st.converged = false;
    let has_ineq = prob.num_ineq() > 0;
    let proj = |z: &DVector<f64>| prob.proj_n(z);
    let mut status = Status::IterationLimit;
    for t in 0..cfg.max_iters {
        if cfg.max_time.is_some_and(|lim| start.elapsed() >= lim) {
            status = Status::TimeLimit;
            break;
        }
        let md = st.model.data(prob);
        let alt = alternating_max(&md, &prob.b, proj, has_ineq, &st.y, cfg.rho, st.ipm.as_ref(), &cfg.subproblem)?;
        let y_cand = candidate_iterate(prob.ineq_mask(), &st.y, &alt.nu, &alt.point.ax, &prob.b, cfg.rho);
        let pen = penalized_obj(prob, &y_cand, kc, &lanczos_cfg(cfg, st.iters as u64))?;
        let model_val = model_value(&md, &prob.b, &y_cand, &cfg.subproblem.ipm)?.min(st.f_y);
        let descent = descent_test(st.f_y, pen.f, model_val, cfg.beta);
        if descent {
            st.y = y_cand.clone();
            st.f_y = pen.f;
            st.lambda_y = pen.lambda_max;
            st.descent_steps += 1;
        } else {
            st.null_steps += 1;
        }
        st.iters += 1;
        st.nu = alt.nu.clone();
        st.model.update(&md, &alt.point, &pen.vecs)?;
        st.ipm = Some(alt.ipm_state.clone());
        let res = compute_residuals(prob, &st.y, st.f_y, st.lambda_y, &alt.point.ax, alt.point.cx);
        st.residuals = Some(res);
        st.last = Some(PointStats {
            ax: alt.point.ax.clone(),
            cx: alt.point.cx,
            trace: alt.point.trace,
        });
        observer(&IterRecord {
            iter: t + 1,
            elapsed: start.elapsed(),
            f_y: st.f_y,
            f_cand: pen.f,
            model_val,
            descent,
            residuals: res,
            y: &st.y,
            y_cand: &y_cand,
            nu: &alt.nu,
            point: &alt.point,
            model: &st.model,
            alt_passes: alt.passes,
        });
        if res.converged(cfg.eps, cfg.linf_check) {
            st.converged = true;
            status = Status::Converged;
            break;
        }
    }
    Ok(SolveOutput { state: st, status })
}

/// Checks a supplied state against the problem and configuration and
/// re-evaluates `f` at its center.
fn prepare_init(prob: &SdpProblem, cfg: &SolverConfig, mut st: SolverState) -> Result<SolverState> {
    if st.y.len() != prob.m() || st.model.n() != prob.n || st.nu.len() != prob.m() {
        return Err(Error::Dimension(format!(
            "state is for n = {}, m = {}; problem has n = {}, m = {}",
            st.model.n(),
            st.y.len(),
            prob.n,
            prob.m()
        )));
    }
    if st.model.a_xbar.len() != prob.m() {
        return Err(Error::Dimension("aggregate statistics have the wrong length".into()));
    }
    for i in 0..prob.m() {
        if prob.is_ineq(i) {
            st.y[i] = st.y[i].max(0.0);
        } else {
            st.nu[i] = 0.0;
        }
    }
    let (kc, kp) = cfg.ranks(prob.n);
    st.model.set_ranks(kc, kp);
    let explicit = matches!(st.model.store, PrimalStore::Explicit(_));
    let wanted_sketch = cfg.sketch_rank.min(prob.n);
    let store_ok = match &st.model.store {
        PrimalStore::Explicit(_) => cfg.sketch_rank == 0,
        PrimalStore::Sketch(s) => s.r == wanted_sketch,
    };
    if !store_ok || (explicit && cfg.sketch_rank != 0) {
        let (u, lam) = st.model.xbar_factor();
        st.model.set_xbar(prob, &u, &lam, empty_store(prob.n, cfg)?)?;
    }
    if st.ipm.as_ref().is_some_and(|s| s.k() != kc + kp) {
        st.ipm = None;
    }
    let pen = penalized_obj(prob, &st.y, kc, &lanczos_cfg(cfg, u64::MAX - 1))?;
    st.f_y = pen.f;
    st.lambda_y = pen.lambda_max;
    st.scale_c = prob.scale_c;
    st.scale_x = prob.scale_x;
    st.row_scale = prob.row_scale.clone();
    Ok(st)
}
