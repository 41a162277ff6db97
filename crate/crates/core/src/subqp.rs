//! Small subproblems over the spectral set `𝒳̂ = {ηX̄ + VSVᵀ}`.
//!
//! Both problems are posed in budget-normalized variables: with
//! `X = α(η X̄/tr(X̄) + V S Vᵀ)` the constraint `tr(X) ≤ α` becomes
//! `tr(S) + η ≤ 1`. Two primal-dual path-following interior point methods
//! solve them:
//!
//! * [`ipm_eval`] minimizes `g₁ᵀsvec(S) + ηg₂`, giving the model value
//!   `f̂(y)`;
//! * [`ipm_quad`] minimizes `½sᵀQ₁₁s + η q₁₂ᵀs + ½η²q₂₂ + h₁ᵀs + ηh₂`,
//!   the proximal step on the model.
//!
//! Newton directions come from the reduced `svec(ΔS)` systems with the
//! remaining directions recovered by back-substitution. When `tr(X̄) = 0`
//! the `η` block is dropped.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symlin::{cholesky, small_eigh, solve_spd, spd_inverse, svec, svec_inv, svec_len, symm_kron, SVec};

fn sv(m: &DMatrix<f64>) -> DVector<f64> {
    svec(m).data
}

fn mat(v: &DVector<f64>) -> DMatrix<f64> {
    svec_inv(&SVec::from_vec(v.as_slice().to_vec()).expect("triangular length")).expect("triangular length")
}

fn v_identity(k: usize) -> DVector<f64> {
    sv(&DMatrix::identity(k, k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    /// Stop once the complementarity `⟨S,T⟩ + ηζ + ω·slack` drops below this.
    pub gap_tol: f64,
    /// Relative tolerance on the stationarity residuals.
    pub residual_tol: f64,
    pub max_iters: usize,
    pub min_step: f64,
    /// Fraction of the exact boundary step taken.
    pub boundary_frac: f64,
    pub backtrack: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            residual_tol: 1e-9,
            max_iters: 100,
            min_step: 1e-12,
            boundary_frac: 0.99,
            backtrack: 0.8,
        }
    }
}

/// Primal-dual iterate `(S, η, T, ζ, ω)` and barrier parameter `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmState {
    pub s: DMatrix<f64>,
    pub eta: f64,
    pub t: DMatrix<f64>,
    pub zeta: f64,
    pub omega: f64,
    pub mu: f64,
}

impl IpmState {
    /// `S = I/(2(k+2))`, `η = 1/(2(k+2))`, `T = I`, `ζ = ω = 1`.
    pub fn cold(k: usize, has_eta: bool) -> Self {
        let c = 1.0 / (2.0 * (k as f64 + 2.0));
        let mut st = Self {
            s: DMatrix::identity(k, k) * c,
            eta: if has_eta { c } else { 0.0 },
            t: DMatrix::identity(k, k),
            zeta: if has_eta { 1.0 } else { 0.0 },
            omega: 1.0,
            mu: 0.0,
        };
        st.mu = st.gap(has_eta) / (2.0 * barrier_terms(k, has_eta));
        st
    }

    pub fn k(&self) -> usize {
        self.s.nrows()
    }

    /// `1 − tr(S) − η`.
    pub fn slack(&self) -> f64 {
        1.0 - self.s.trace() - self.eta
    }

    pub fn gap(&self, has_eta: bool) -> f64 {
        let st = self.s.component_mul(&self.t).sum();
        let e = if has_eta { self.eta * self.zeta } else { 0.0 };
        st + e + self.omega * self.slack()
    }

    pub fn is_strictly_feasible(&self, has_eta: bool) -> bool {
        let scalars = if has_eta { self.eta > 0.0 && self.zeta > 0.0 } else { self.eta == 0.0 };
        scalars
            && self.omega > 0.0
            && self.slack() > 0.0
            && cholesky(&self.s).is_ok()
            && cholesky(&self.t).is_ok()
            && [self.eta, self.zeta, self.omega].iter().all(|v| v.is_finite())
    }
}

fn barrier_terms(k: usize, has_eta: bool) -> f64 {
    (k + if has_eta { 2 } else { 1 }) as f64
}

/// Newton direction `(ΔS, Δη, ΔT, Δζ, Δω)` with matrices in `svec` form.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub ds: DVector<f64>,
    pub deta: f64,
    pub dt: DVector<f64>,
    pub dzeta: f64,
    pub domega: f64,
}

impl Direction {
    pub fn zeros(k: usize) -> Self {
        let l = svec_len(k);
        Self {
            ds: DVector::zeros(l),
            deta: 0.0,
            dt: DVector::zeros(l),
            dzeta: 0.0,
            domega: 0.0,
        }
    }
}

/// Coefficients of the model-evaluation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCoeffs {
    pub g1: DVector<f64>,
    pub g2: f64,
    pub has_eta: bool,
}

/// Coefficients of the quadratic proximal subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadCoeffs {
    pub q11: DMatrix<f64>,
    pub q12: DVector<f64>,
    pub q22: f64,
    pub h1: DVector<f64>,
    pub h2: f64,
    pub has_eta: bool,
}

impl EvalCoeffs {
    pub fn k(&self) -> usize {
        crate::symlin::triangular_side(self.g1.len()).expect("triangular length")
    }

    pub fn objective(&self, s: &DMatrix<f64>, eta: f64) -> f64 {
        self.g1.dot(&sv(s)) + if self.has_eta { eta * self.g2 } else { 0.0 }
    }
}

impl QuadCoeffs {
    pub fn k(&self) -> usize {
        crate::symlin::triangular_side(self.h1.len()).expect("triangular length")
    }

    pub fn objective(&self, s: &DMatrix<f64>, eta: f64) -> f64 {
        let x = sv(s);
        let mut v = 0.5 * x.dot(&(&self.q11 * &x)) + self.h1.dot(&x);
        if self.has_eta {
            v += eta * self.q12.dot(&x) + 0.5 * eta * eta * self.q22 + eta * self.h2;
        }
        v
    }

    /// Gradient of the objective in `(svec(S), η)`.
    fn gradient(&self, s: &DVector<f64>, eta: f64) -> (DVector<f64>, f64) {
        if self.has_eta {
            (&self.q11 * s + &self.q12 * eta + &self.h1, self.q12.dot(s) + eta * self.q22 + self.h2)
        } else {
            (&self.q11 * s + &self.h1, 0.0)
        }
    }
}

/// The shared form of both problems: quadratic with possibly zero `Q`.
trait Subproblem {
    fn k(&self) -> usize;
    fn has_eta(&self) -> bool;
    fn gradient(&self, s: &DVector<f64>, eta: f64) -> (DVector<f64>, f64);
    fn objective(&self, s: &DMatrix<f64>, eta: f64) -> f64;
    fn newton(&self, st: &IpmState, mu: f64) -> Result<Direction>;
    fn scale(&self) -> f64;
}

impl Subproblem for EvalCoeffs {
    fn k(&self) -> usize {
        EvalCoeffs::k(self)
    }
    fn has_eta(&self) -> bool {
        self.has_eta
    }
    fn gradient(&self, _s: &DVector<f64>, _eta: f64) -> (DVector<f64>, f64) {
        (self.g1.clone(), if self.has_eta { self.g2 } else { 0.0 })
    }
    fn objective(&self, s: &DMatrix<f64>, eta: f64) -> f64 {
        EvalCoeffs::objective(self, s, eta)
    }
    fn newton(&self, st: &IpmState, mu: f64) -> Result<Direction> {
        newton_eval(self, st, mu)
    }
    fn scale(&self) -> f64 {
        self.g1.amax().max(self.g2.abs())
    }
}

impl Subproblem for QuadCoeffs {
    fn k(&self) -> usize {
        QuadCoeffs::k(self)
    }
    fn has_eta(&self) -> bool {
        self.has_eta
    }
    fn gradient(&self, s: &DVector<f64>, eta: f64) -> (DVector<f64>, f64) {
        QuadCoeffs::gradient(self, s, eta)
    }
    fn objective(&self, s: &DMatrix<f64>, eta: f64) -> f64 {
        QuadCoeffs::objective(self, s, eta)
    }
    fn newton(&self, st: &IpmState, mu: f64) -> Result<Direction> {
        newton_quad(self, st, mu)
    }
    fn scale(&self) -> f64 {
        self.h1.amax().max(self.h2.abs()).max(self.q11.amax()).max(self.q12.amax()).max(self.q22)
    }
}

/// Stationarity residuals `F₁ = ∇_S − svec(T) + ωv_I`, `F₂ = ∇_η − ζ + ω`.
fn stationarity<P: Subproblem + ?Sized>(p: &P, st: &IpmState) -> (DVector<f64>, f64) {
    let s = sv(&st.s);
    let (gs, ge) = p.gradient(&s, st.eta);
    let f1 = gs - sv(&st.t) + v_identity(st.k()) * st.omega;
    let f2 = if p.has_eta() { ge - st.zeta + st.omega } else { 0.0 };
    (f1, f2)
}

/// Shared quantities of the linearized complementarity equations.
struct Linearization {
    v: DVector<f64>,
    k_mat: DMatrix<f64>,
    r_t: DVector<f64>,
    r_c: f64,
    kappa1: f64,
}

fn linearize(st: &IpmState, mu: f64) -> Result<Linearization> {
    let k = st.k();
    let s_inv = spd_inverse(&st.s)?;
    let k_mat = symm_kron(&st.t, &s_inv)?;
    let r_t = sv(&(&s_inv * mu - &st.t));
    let slack = st.slack();
    Ok(Linearization {
        v: v_identity(k),
        k_mat,
        r_t,
        r_c: mu / st.omega - slack,
        kappa1: slack / st.omega,
    })
}

/// Newton direction for the model-evaluation problem.
///
/// Solves `(T⊗ₛS⁻¹ + c/(κ₁c + 1)·v_Iv_Iᵀ) svec(ΔS) = rhs` with `c = ζ/η`,
/// `κ₁ = slack/ω`, then back-substitutes the remaining directions.
pub fn newton_eval(c: &EvalCoeffs, st: &IpmState, mu: f64) -> Result<Direction> {
    let lin = linearize(st, mu)?;
    let (f1, f2) = stationarity(c, st);
    let Linearization { v, k_mat, r_t, r_c, kappa1 } = lin;
    if !c.has_eta {
        return eta_free_direction(&k_mat, &v, &f1, &r_t, r_c, kappa1);
    }
    let cz = st.zeta / st.eta;
    let e = -f2 + mu / st.eta - st.zeta;
    let denom = kappa1 * cz + 1.0;
    let m = &k_mat + &v * v.transpose() * (cz / denom);
    let rhs = -&f1 + &r_t - &v * ((e + cz * r_c) / denom);
    let ds = solve_spd(&m, &rhs)?;
    let vds = v.dot(&ds);
    let domega = (e + cz * r_c + cz * vds) / denom;
    let deta = (kappa1 * e - r_c - vds) / denom;
    Ok(Direction {
        dt: &r_t - &k_mat * &ds,
        dzeta: mu / st.eta - st.zeta - cz * deta,
        ds,
        deta,
        domega,
    })
}

/// Newton direction for the quadratic subproblem.
///
/// Solves `(Q₁₁ + T⊗ₛS⁻¹ − (κ₁q₁₂q₁₂ᵀ + q₁₂v_Iᵀ + v_Iq₁₂ᵀ − κ₂v_Iv_Iᵀ)/(κ₁κ₂ + 1))
/// svec(ΔS) = rhs` with `κ₂ = ζ/η + q₂₂`.
pub fn newton_quad(c: &QuadCoeffs, st: &IpmState, mu: f64) -> Result<Direction> {
    let lin = linearize(st, mu)?;
    let (f1, f2) = stationarity(c, st);
    let Linearization { v, k_mat, r_t, r_c, kappa1 } = lin;
    let base = &c.q11 + &k_mat;
    if !c.has_eta {
        let mut d = eta_free_direction(&base, &v, &f1, &r_t, r_c, kappa1)?;
        d.dt = &r_t - &k_mat * &d.ds;
        return Ok(d);
    }
    let q = &c.q12;
    let cz = st.zeta / st.eta;
    let kappa2 = cz + c.q22;
    let denom = kappa1 * kappa2 + 1.0;
    let e = -f2 + mu / st.eta - st.zeta;
    let outer = q * q.transpose() * kappa1 + q * v.transpose() + &v * q.transpose() - &v * v.transpose() * kappa2;
    let m = &base - outer / denom;
    let rhs = -&f1 + &r_t - q * ((kappa1 * e - r_c) / denom) - &v * ((e + kappa2 * r_c) / denom);
    let ds = solve_spd(&m, &rhs)?;
    let deta = (kappa1 * e - r_c - (q * kappa1 + &v).dot(&ds)) / denom;
    let domega = (e + kappa2 * r_c + (&v * kappa2 - q).dot(&ds)) / denom;
    Ok(Direction {
        dt: &r_t - &k_mat * &ds,
        dzeta: mu / st.eta - st.zeta - cz * deta,
        ds,
        deta,
        domega,
    })
}

/// Direction without the `η` block: `(B + v_Iv_Iᵀ/κ₁) svec(ΔS) =
/// −F₁ + r_T − v_I r_c/κ₁`, where `B` is `T⊗ₛS⁻¹` (plus `Q₁₁`).
fn eta_free_direction(
    base: &DMatrix<f64>,
    v: &DVector<f64>,
    f1: &DVector<f64>,
    r_t: &DVector<f64>,
    r_c: f64,
    kappa1: f64,
) -> Result<Direction> {
    let m = base + v * v.transpose() / kappa1;
    let rhs = -f1 + r_t - v * (r_c / kappa1);
    let ds = solve_spd(&m, &rhs)?;
    let domega = (r_c + v.dot(&ds)) / kappa1;
    Ok(Direction {
        dt: r_t - base * &ds,
        ds,
        deta: 0.0,
        dzeta: 0.0,
        domega,
    })
}

/// Residual (max-norm) of the full linearized Newton system for a direction:
/// the five equations before elimination, with `Q₁₁ = 0`, `q = 0` for the
/// evaluation problem.
pub fn newton_residual_quad(c: &QuadCoeffs, st: &IpmState, mu: f64, d: &Direction) -> f64 {
    full_residual(c, &c.q11, &c.q12, c.q22, st, mu, d)
}

pub fn newton_residual_eval(c: &EvalCoeffs, st: &IpmState, mu: f64, d: &Direction) -> f64 {
    let l = c.g1.len();
    full_residual(c, &DMatrix::zeros(l, l), &DVector::zeros(l), 0.0, st, mu, d)
}

fn full_residual<P: Subproblem>(
    p: &P,
    q11: &DMatrix<f64>,
    q12: &DVector<f64>,
    q22: f64,
    st: &IpmState,
    mu: f64,
    d: &Direction,
) -> f64 {
    let (f1, f2) = stationarity(p, st);
    let k = st.k();
    let v = v_identity(k);
    let s_inv = spd_inverse(&st.s).expect("S positive definite");
    let kk = symm_kron(&st.t, &s_inv).expect("square");
    let slack = st.slack();
    let mut r = 0.0f64;
    let e1 = q11 * &d.ds + q12 * d.deta - &d.dt + &v * d.domega + &f1;
    r = r.max(e1.amax());
    let e3 = slack / st.omega * d.domega - v.dot(&d.ds) - d.deta - (mu / st.omega - slack);
    r = r.max(e3.abs());
    let e4 = &kk * &d.ds + &d.dt - sv(&(&s_inv * mu - &st.t));
    r = r.max(e4.amax());
    if p.has_eta() {
        let e2 = q12.dot(&d.ds) + q22 * d.deta - d.dzeta + d.domega + f2;
        let e5 = st.zeta / st.eta * d.deta + d.dzeta - (mu / st.eta - st.zeta);
        r = r.max(e2.abs()).max(e5.abs());
    }
    r
}

/// `μ ← min(μ_prev, γ·gap/(2·terms))`, `γ = 1` for `δ ≤ 1/5`, else
/// `1/2 − (2/5)δ²`. `terms` is `k + 2` (`k + 1` without `η`).
pub fn barrier_update(state: &IpmState, has_eta: bool, delta: f64) -> f64 {
    let gamma = if delta <= 0.2 { 1.0 } else { 0.5 - 0.4 * delta * delta };
    let est = gamma * state.gap(has_eta) / (2.0 * barrier_terms(state.k(), has_eta));
    state.mu.min(est)
}

/// Largest `δ` with `M + δΔ ⪰ 0` for `M ≻ 0` (`∞` if unbounded).
fn psd_boundary(m: &DMatrix<f64>, dm: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky(m)?;
    let x = l.solve_lower_triangular(dm).expect("positive diagonal");
    let w = l.solve_lower_triangular(&x.transpose()).expect("positive diagonal");
    let (vals, _) = small_eigh(&w);
    let lo = vals[vals.len() - 1];
    Ok(if lo < 0.0 { -1.0 / lo } else { f64::INFINITY })
}

fn apply(st: &IpmState, d: &Direction, delta: f64) -> IpmState {
    IpmState {
        s: &st.s + mat(&d.ds) * delta,
        eta: st.eta + delta * d.deta,
        t: &st.t + mat(&d.dt) * delta,
        zeta: st.zeta + delta * d.dzeta,
        omega: st.omega + delta * d.domega,
        mu: st.mu,
    }
}

/// Step `δ ∈ (0, 1]` keeping `θ + δΔθ` strictly feasible: `0.99×` the exact
/// boundary step, then backtracking by `0.8` until the Cholesky tests pass.
pub fn line_search_feasible(st: &IpmState, d: &Direction, has_eta: bool, opts: &IpmOptions) -> Result<f64> {
    let mut bound = f64::INFINITY;
    let mut limit = |x: f64, dx: f64| {
        if dx < 0.0 {
            bound = bound.min(-x / dx);
        }
    };
    if has_eta {
        limit(st.eta, d.deta);
        limit(st.zeta, d.dzeta);
    }
    limit(st.omega, d.domega);
    limit(st.slack(), -mat(&d.ds).trace() - d.deta);
    bound = bound.min(psd_boundary(&st.s, &mat(&d.ds))?);
    bound = bound.min(psd_boundary(&st.t, &mat(&d.dt))?);
    let mut delta = if bound.is_finite() { (opts.boundary_frac * bound).min(1.0) } else { 1.0 };
    if bound <= 1.0 && delta >= bound {
        delta = bound * opts.boundary_frac;
    }
    while delta >= opts.min_step {
        if apply(st, d, delta).is_strictly_feasible(has_eta) {
            return Ok(delta);
        }
        delta *= opts.backtrack;
    }
    Err(Error::StepFailure {
        min_step: opts.min_step,
    })
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub state: IpmState,
    pub value: f64,
    pub iters: usize,
    /// The gap or residual tolerance was not reached.
    pub inexact: bool,
}

impl IpmSolution {
    pub fn s(&self) -> &DMatrix<f64> {
        &self.state.s
    }

    pub fn eta(&self) -> f64 {
        self.state.eta
    }
}

fn run<P: Subproblem>(p: &P, init: IpmState, opts: &IpmOptions) -> Result<IpmSolution> {
    let has_eta = p.has_eta();
    let terms = barrier_terms(p.k(), has_eta);
    let scale = 1.0 + p.scale();
    let mut st = init;
    let mut failures = 0;
    for iter in 0..=opts.max_iters {
        let (f1, f2) = stationarity(p, &st);
        let resid = f1.amax().max(f2.abs());
        if st.gap(has_eta) < opts.gap_tol && resid <= opts.residual_tol * scale {
            return Ok(IpmSolution {
                value: p.objective(&st.s, st.eta),
                state: st,
                iters: iter,
                inexact: false,
            });
        }
        if iter == opts.max_iters {
            break;
        }
        let step = p.newton(&st, st.mu).and_then(|d| {
            if d.ds.iter().chain(d.dt.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("Newton direction"));
            }
            let delta = line_search_feasible(&st, &d, has_eta, opts)?;
            Ok((d, delta))
        });
        match step {
            Ok((d, delta)) => {
                failures = 0;
                st = apply(&st, &d, delta);
                st.mu = barrier_update(&st, has_eta, delta);
            }
            Err(Error::StepFailure { .. }) | Err(Error::NotPositiveDefinite { .. }) | Err(Error::NonFinite(_)) => {
                failures += 1;
                if failures > 3 {
                    break;
                }
                // Re-center with a larger barrier parameter.
                st.mu = st.gap(has_eta) / terms;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(IpmSolution {
        value: p.objective(&st.s, st.eta),
        state: st,
        iters: opts.max_iters,
        inexact: true,
    })
}

/// Minimizes `g₁ᵀsvec(S) + ηg₂` over `S ⪰ 0, η ≥ 0, tr(S) + η ≤ 1`.
pub fn ipm_eval(c: &EvalCoeffs, opts: &IpmOptions) -> Result<IpmSolution> {
    run(c, IpmState::cold(c.k(), c.has_eta), opts)
}

/// Minimizes the quadratic subproblem, warm-started from `warm` when it is
/// strictly feasible and of matching shape.
pub fn ipm_quad(c: &QuadCoeffs, warm: Option<&IpmState>, opts: &IpmOptions) -> Result<IpmSolution> {
    let k = c.k();
    let init = match warm {
        Some(w) if w.k() == k && w.is_strictly_feasible(c.has_eta) => warm_point(w, c.has_eta),
        _ => IpmState::cold(k, c.has_eta),
    };
    run(c, init, opts)
}

/// Pulls a previous optimum slightly toward the cold start, so that the
/// new coefficients start from a well-centered point.
fn warm_point(w: &IpmState, has_eta: bool) -> IpmState {
    const BLEND: f64 = 0.1;
    let cold = IpmState::cold(w.k(), has_eta);
    let mix = |a: f64, b: f64| (1.0 - BLEND) * a + BLEND * b;
    let mut st = IpmState {
        s: &w.s * (1.0 - BLEND) + &cold.s * BLEND,
        eta: mix(w.eta, cold.eta),
        t: &w.t * (1.0 - BLEND) + &cold.t * BLEND,
        zeta: mix(w.zeta, cold.zeta),
        omega: mix(w.omega, cold.omega),
        mu: 0.0,
    };
    st.mu = st.gap(has_eta) / (2.0 * barrier_terms(w.k(), has_eta));
    st
}

/// Data of the current model `𝒳̂` needed to assemble coefficients:
/// `compressed` rows are `svec(VᵀAᵢV)`, `cvv = svec(VᵀCV)`, and the tracked
/// statistics of `X̄`.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub alpha: f64,
    pub compressed: DMatrix<f64>,
    pub cvv: DVector<f64>,
    pub a_xbar: DVector<f64>,
    pub c_xbar: f64,
    pub tr_xbar: f64,
}

/// A point `X = ηX̄ + VSVᵀ` of the model in original (unnormalized) scale,
/// with its linear statistics.
#[derive(Debug, Clone)]
pub struct ModelPoint {
    pub eta: f64,
    pub s: DMatrix<f64>,
    pub ax: DVector<f64>,
    pub cx: f64,
    pub trace: f64,
}

impl ModelData {
    pub fn k(&self) -> usize {
        crate::symlin::triangular_side(self.cvv.len()).expect("triangular length")
    }

    /// Whether the aggregate carries weight; otherwise `η` is dropped.
    pub fn has_eta(&self) -> bool {
        self.tr_xbar > 1e-14 * self.alpha
    }

    /// `(svec(Vᵀ(𝒜*y − C)V), ⟨X̄, 𝒜*y − C⟩)`.
    fn slack_terms(&self, y: &DVector<f64>) -> (DVector<f64>, f64) {
        (self.compressed.tr_mul(y) - &self.cvv, self.a_xbar.dot(y) - self.c_xbar)
    }

    pub fn eval_coeffs(&self, y: &DVector<f64>) -> EvalCoeffs {
        let (g, xg) = self.slack_terms(y);
        let has_eta = self.has_eta();
        EvalCoeffs {
            g1: g * self.alpha,
            g2: if has_eta { self.alpha / self.tr_xbar * xg } else { 0.0 },
            has_eta,
        }
    }

    /// Coefficients of `max_{X ∈ 𝒳̂} ψ(X, ν̃)` for the proximal center `y`.
    pub fn quad_coeffs(&self, y: &DVector<f64>, b: &DVector<f64>, nu: &DVector<f64>, rho: f64) -> QuadCoeffs {
        let shifted = y - (b - nu) / rho;
        let (h, xh) = self.slack_terms(&shifted);
        let has_eta = self.has_eta();
        let a2 = self.alpha * self.alpha / rho;
        let q11 = self.compressed.tr_mul(&self.compressed) * a2;
        let l = self.cvv.len();
        let (q12, q22, h2) = if has_eta {
            let tr = self.tr_xbar;
            (
                self.compressed.tr_mul(&self.a_xbar) * (a2 / tr),
                a2 / (tr * tr) * self.a_xbar.norm_squared(),
                self.alpha / tr * xh,
            )
        } else {
            (DVector::zeros(l), 0.0, 0.0)
        };
        QuadCoeffs {
            q11: (&q11 + q11.transpose()) * 0.5,
            q12,
            q22,
            h1: h * self.alpha,
            h2,
            has_eta,
        }
    }

    /// Copy with the given rows of `𝒜` removed.
    fn without_rows(&self, drop: &[bool]) -> ModelData {
        let mut md = self.clone();
        for (i, _) in drop.iter().enumerate().filter(|(_, &d)| d) {
            md.compressed.row_mut(i).fill(0.0);
            md.a_xbar[i] = 0.0;
        }
        md
    }

    /// Maps a normalized subproblem solution back to `X = ηX̄ + VSVᵀ`.
    pub fn point(&self, s_sub: &DMatrix<f64>, eta_sub: f64) -> ModelPoint {
        let s = s_sub * self.alpha;
        let eta = if self.has_eta() { self.alpha * eta_sub / self.tr_xbar } else { 0.0 };
        let x = sv(&s);
        ModelPoint {
            ax: &self.a_xbar * eta + &self.compressed * &x,
            cx: eta * self.c_xbar + self.cvv.dot(&x),
            trace: eta * self.tr_xbar + s.trace(),
            eta,
            s,
        }
    }
}

/// `ψ(X, ν) = ⟨C,X⟩ + ⟨b − ν − 𝒜X, y⟩ − ‖b − ν − 𝒜X‖²/(2ρ)`.
pub fn psi(point: &ModelPoint, nu: &DVector<f64>, y: &DVector<f64>, b: &DVector<f64>, rho: f64) -> f64 {
    let r = b - nu - &point.ax;
    point.cx + r.dot(y) - r.norm_squared() / (2.0 * rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltMaxOptions {
    pub max_passes: usize,
    /// Stop when `‖Δν‖ ≤ tol·(1 + ‖b‖)`.
    pub tol: f64,
    pub ipm: IpmOptions,
}

impl Default for AltMaxOptions {
    fn default() -> Self {
        Self {
            max_passes: 50,
            tol: 1e-8,
            ipm: IpmOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AltMaxResult {
    pub point: ModelPoint,
    pub nu: DVector<f64>,
    pub passes: usize,
    pub inexact: bool,
    /// `ψ` after every half-step.
    pub psi_trace: Vec<f64>,
    pub ipm_state: IpmState,
    pub newton_iters: usize,
}

/// Maximizes `φ(X) = max_{ν ∈ N} ψ(X, ν)` over the model, where the inner
/// maximum is `ν(X) = proj_N(b − 𝒜X − ρy)`.
///
/// `φ` is concave and piecewise quadratic. Rows with `ν(X) > 0` contribute
/// a constant, so each pass solves the quadratic subproblem with those rows
/// removed, which matches `φ` to first order at the current point, and
/// backtracks along the segment towards its solution until `φ` increases.
/// Stops when `ν` settles or no step increases `φ`.
pub fn alternating_max(
    md: &ModelData,
    b: &DVector<f64>,
    proj_n: impl Fn(&DVector<f64>) -> DVector<f64>,
    has_ineq: bool,
    y: &DVector<f64>,
    rho: f64,
    warm: Option<&IpmState>,
    opts: &AltMaxOptions,
) -> Result<AltMaxResult> {
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
    }
    let nu_of = |point: &ModelPoint| {
        if has_ineq {
            proj_n(&(b - &point.ax - y * rho))
        } else {
            DVector::zeros(b.len())
        }
    };
    let zero = DVector::zeros(b.len());
    let first = ipm_quad(&md.quad_coeffs(y, b, &zero, rho), warm, &opts.ipm)?;
    let mut point = md.point(first.s(), first.eta());
    let mut nu = nu_of(&point);
    let mut phi = psi(&point, &nu, y, b, rho);
    let mut psi_trace = vec![psi(&point, &zero, y, b, rho), phi];
    let mut inexact = first.inexact;
    let mut newton_iters = first.iters;
    let (mut s_cur, mut eta_cur) = (first.s().clone(), first.eta());
    let mut state = first.state;
    let tol = opts.tol * (1.0 + b.norm());
    let mut passes = 1;
    let mut moved = nu.norm();
    while has_ineq && moved > tol && passes < opts.max_passes {
        passes += 1;
        let active: Vec<bool> = nu.iter().map(|&v| v > 0.0).collect();
        let sol = ipm_quad(&md.without_rows(&active).quad_coeffs(y, b, &nu, rho), Some(&state), &opts.ipm)?;
        newton_iters += sol.iters;
        inexact |= sol.inexact;
        let (ds, deta) = (sol.s() - &s_cur, sol.eta() - eta_cur);
        let mut theta = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let (s_t, eta_t) = (&s_cur + &ds * theta, eta_cur + deta * theta);
            let p = md.point(&s_t, eta_t);
            let n = nu_of(&p);
            let v = psi(&p, &n, y, b, rho);
            if v > phi {
                accepted = Some((s_t, eta_t, p, n, v));
                break;
            }
            theta *= 0.5;
        }
        state = sol.state;
        let Some((s_t, eta_t, p, n, v)) = accepted else {
            break;
        };
        moved = (&n - &nu).norm();
        (s_cur, eta_cur, point, nu, phi) = (s_t, eta_t, p, n, v);
        psi_trace.push(phi);
    }
    Ok(AltMaxResult {
        point,
        nu,
        passes,
        inexact,
        psi_trace,
        ipm_state: state,
        newton_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_sym(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    fn rand_spd(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(k, k) * 0.1
    }

    fn rand_state(k: usize, rng: &mut ChaCha8Rng) -> IpmState {
        let mut s = rand_spd(k, rng);
        s /= 2.0 * s.trace();
        IpmState {
            s,
            eta: rng.random_range(0.01..0.3),
            t: rand_spd(k, rng),
            zeta: rng.random_range(0.1..2.0),
            omega: rng.random_range(0.1..2.0),
            mu: rng.random_range(1e-3..1e-1),
        }
    }

    fn rand_quad(k: usize, rng: &mut ChaCha8Rng) -> QuadCoeffs {
        let l = svec_len(k);
        let m = DMatrix::from_fn(l + 2, l + 1, |_, _| rng.random_range(-1.0..1.0));
        let g = m.transpose() * m;
        QuadCoeffs {
            q11: g.view((0, 0), (l, l)).into_owned(),
            q12: g.view((0, l), (l, 1)).column(0).into_owned(),
            q22: g[(l, l)],
            h1: DVector::from_fn(l, |_, _| rng.random_range(-2.0..2.0)),
            h2: rng.random_range(-2.0..2.0),
            has_eta: true,
        }
    }

    fn analytic_eval(c: &EvalCoeffs) -> f64 {
        let (vals, _) = small_eigh(&mat(&c.g1));
        vals[vals.len() - 1].min(c.g2).min(0.0)
    }

    #[test]
    fn eval_examples() {
        let c = EvalCoeffs {
            g1: sv(&(-DMatrix::identity(3, 3))),
            g2: -1.0,
            has_eta: true,
        };
        let sol = ipm_eval(&c, &IpmOptions::default()).unwrap();
        assert!((sol.value + 1.0).abs() < 1e-6);
        assert!((sol.s().trace() + sol.eta() - 1.0).abs() < 1e-6);

        let c = EvalCoeffs {
            g1: sv(&DMatrix::identity(2, 2)),
            g2: 0.5,
            has_eta: true,
        };
        let sol = ipm_eval(&c, &IpmOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-6 && sol.eta() < 1e-6 && sol.s().trace() < 1e-6);
    }

    #[test]
    fn eval_matches_simplex_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..30 {
            let k = 1 + trial % 5;
            let c = EvalCoeffs {
                g1: sv(&rand_sym(k, &mut rng)),
                g2: rng.random_range(-1.0..1.0),
                has_eta: trial % 7 != 0,
            };
            let sol = ipm_eval(&c, &IpmOptions::default()).unwrap();
            let mut expect = analytic_eval(&c);
            if !c.has_eta {
                let (vals, _) = small_eigh(&mat(&c.g1));
                expect = vals[k - 1].min(0.0);
            }
            assert!(!sol.inexact, "trial {trial}");
            assert!((sol.value - expect).abs() < 1e-6, "trial {trial}: {} vs {expect}", sol.value);
        }
    }

    #[test]
    fn quad_scalar_example() {
        let c = QuadCoeffs {
            q11: DMatrix::from_element(1, 1, 1.0),
            q12: DVector::zeros(1),
            q22: 0.0,
            h1: DVector::from_element(1, -1.0),
            h2: 0.0,
            has_eta: false,
        };
        let sol = ipm_quad(&c, None, &IpmOptions::default()).unwrap();
        // Degenerate optimum (ω = slack = 0): S converges like √gap.
        assert!((sol.s()[(0, 0)] - 1.0).abs() < 1e-3);
        assert!((sol.value + 0.5).abs() < 1e-6);
        let tight = IpmOptions {
            gap_tol: 1e-13,
            ..IpmOptions::default()
        };
        let sol = ipm_quad(&c, None, &tight).unwrap();
        assert!((sol.s()[(0, 0)] - 1.0).abs() < 1e-5);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = rand_quad(3, &mut rng);
        c.h1.fill(0.0);
        c.h2 = 0.0;
        let sol = ipm_quad(&c, None, &IpmOptions::default()).unwrap();
        assert!(sol.s().norm() < 1e-3 && sol.eta() < 1e-3 && sol.value.abs() < 1e-6);
    }

    #[test]
    fn newton_systems_back_substitute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let k = 1 + trial % 4;
            let st = rand_state(k, &mut rng);
            let e = EvalCoeffs {
                g1: sv(&rand_sym(k, &mut rng)),
                g2: rng.random_range(-1.0..1.0),
                has_eta: true,
            };
            let d = newton_eval(&e, &st, st.mu).unwrap();
            assert!(newton_residual_eval(&e, &st, st.mu, &d) < 1e-8, "eval {trial}");
            let q = rand_quad(k, &mut rng);
            let d = newton_quad(&q, &st, st.mu).unwrap();
            assert!(newton_residual_quad(&q, &st, st.mu, &d) < 1e-8, "quad {trial}");
        }
    }

    #[test]
    fn barrier_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut st = rand_state(2, &mut rng);
        st.mu = 1.0;
        let gap = st.gap(true) / 8.0;
        assert!((barrier_update(&st, true, 0.2) - gap).abs() < 1e-15);
        assert!((barrier_update(&st, true, 1.0) - 0.1 * gap).abs() < 1e-15);
        st.mu = 1e-9;
        assert_eq!(barrier_update(&st, true, 0.5), 1e-9);
    }

    #[test]
    fn line_search_examples() {
        let opts = IpmOptions::default();
        let st = IpmState::cold(2, true);
        assert_eq!(line_search_feasible(&st, &Direction::zeros(2), true, &opts).unwrap(), 1.0);
        let mut d = Direction::zeros(2);
        d.deta = -st.eta;
        let delta = line_search_feasible(&st, &d, true, &opts).unwrap();
        assert!(delta < 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let st = rand_state(3, &mut rng);
            let l = svec_len(3);
            let d = Direction {
                ds: DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0)),
                deta: rng.random_range(-1.0..1.0),
                dt: DVector::from_fn(l, |_, _| rng.random_range(-3.0..3.0)),
                dzeta: rng.random_range(-3.0..3.0),
                domega: rng.random_range(-3.0..3.0),
            };
            let delta = line_search_feasible(&st, &d, true, &opts).unwrap();
            assert!(delta > 0.0 && delta <= 1.0);
            assert!(apply(&st, &d, delta).is_strictly_feasible(true));
        }
    }

    #[test]
    fn quad_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let c = rand_quad(3, &mut rng);
            let sol = ipm_quad(&c, None, &IpmOptions::default()).unwrap();
            assert!(!sol.inexact);
            assert!(sol.value <= 1e-9);
            assert!(sol.state.slack() >= -1e-12);
        }
    }

    #[test]
    fn warm_start_reuses_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = rand_quad(3, &mut rng);
        let first = ipm_quad(&c, None, &IpmOptions::default()).unwrap();
        let mut c2 = c.clone();
        c2.h1 += DVector::from_fn(c.h1.len(), |_, _| rng.random_range(-0.01..0.01));
        let warm = ipm_quad(&c2, Some(&first.state), &IpmOptions::default()).unwrap();
        let cold = ipm_quad(&c2, None, &IpmOptions::default()).unwrap();
        assert!((warm.value - cold.value).abs() < 1e-6);
    }

    #[test]
    fn model_point_and_coeffs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = 2;
        let l = svec_len(k);
        let md = ModelData {
            alpha: 2.0,
            compressed: DMatrix::from_fn(4, l, |_, _| rng.random_range(-1.0..1.0)),
            cvv: DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0)),
            a_xbar: DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)),
            c_xbar: 0.3,
            tr_xbar: 0.5,
        };
        let y = DVector::zeros(4);
        let e = md.eval_coeffs(&y);
        assert!((e.g1 + &md.cvv * 2.0).amax() < 1e-15);
        // ρ → ∞ turns the quadratic coefficients into the evaluation ones.
        let b = DVector::from_element(4, 1.0);
        let y = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let q = md.quad_coeffs(&y, &b, &DVector::zeros(4), 1e12);
        let e = md.eval_coeffs(&y);
        assert!(q.q11.amax() < 1e-10);
        assert!((q.h1 - &e.g1).amax() <= 1e-4 * e.g1.amax());
        assert!((q.h2 - e.g2).abs() <= 1e-4 * e.g2.abs().max(1e-12));
        // Objective consistency: the subproblem value plus constants is ψ.
        let nu = DVector::zeros(4);
        let rho = 0.7;
        let q = md.quad_coeffs(&y, &b, &nu, rho);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.1]));
        let (p0, p1) = (md.point(&DMatrix::zeros(2, 2), 0.0), md.point(&s, 0.3));
        let d_psi = psi(&p1, &nu, &y, &b, rho) - psi(&p0, &nu, &y, &b, rho);
        assert!((d_psi + q.objective(&s, 0.3)).abs() < 1e-12);
        assert!((p1.trace - 2.0 * 0.6).abs() < 1e-12);
    }

    fn project_capped_simplex(x: &mut [f64]) {
        let pos: f64 = x.iter().map(|v| v.max(0.0)).sum();
        if pos <= 1.0 {
            x.iter_mut().for_each(|v| *v = v.max(0.0));
            return;
        }
        let mut sorted = x.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let (mut acc, mut tau) = (0.0, 0.0);
        for (i, v) in sorted.iter().enumerate() {
            acc += v;
            let t = (acc - 1.0) / (i + 1) as f64;
            if v - t > 0.0 {
                tau = t;
            }
        }
        x.iter_mut().for_each(|v| *v = (*v - tau).max(0.0));
    }

    fn project(s: &DVector<f64>, eta: f64) -> (DVector<f64>, f64) {
        let (vals, vecs) = small_eigh(&mat(s));
        let mut x: Vec<f64> = vals.iter().copied().chain([eta]).collect();
        project_capped_simplex(&mut x);
        let k = vals.len();
        let lam = DVector::from_column_slice(&x[..k]);
        (sv(&(&vecs * DMatrix::from_diagonal(&lam) * vecs.transpose())), x[k])
    }

    fn projected_gradient(c: &QuadCoeffs) -> f64 {
        let k = c.k();
        let l = svec_len(k);
        let mut full = DMatrix::zeros(l + 1, l + 1);
        full.view_mut((0, 0), (l, l)).copy_from(&c.q11);
        full.view_mut((0, l), (l, 1)).copy_from(&c.q12);
        full.view_mut((l, 0), (1, l)).copy_from(&c.q12.transpose());
        full[(l, l)] = c.q22;
        let step = 1e-3f64.min(1.0 / full.norm());
        let (mut s, mut eta) = (DVector::zeros(l), 0.0);
        for _ in 0..200_000 {
            let (gs, ge) = c.gradient(&s, eta);
            (s, eta) = project(&(&s - gs * step), eta - step * ge);
        }
        c.objective(&mat(&s), eta)
    }

    #[test]
    fn quad_matches_projected_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for trial in 0..6 {
            let c = rand_quad(1 + trial % 3, &mut rng);
            let ipm = ipm_quad(&c, None, &IpmOptions::default()).unwrap();
            let pg = projected_gradient(&c);
            assert!(ipm.value <= pg + 1e-6, "trial {trial}: {} vs {pg}", ipm.value);
            assert!(pg - ipm.value < 1e-5, "trial {trial}: {} vs {pg}", ipm.value);
        }
    }

    #[test]
    fn alternating_max_increases_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (m, k) = (6, 2);
        let l = svec_len(k);
        let md = ModelData {
            alpha: 3.0,
            compressed: DMatrix::from_fn(m, l, |_, _| rng.random_range(-1.0..1.0)),
            cvv: DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0)),
            a_xbar: DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)),
            c_xbar: 0.2,
            tr_xbar: 1.0,
        };
        let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let proj = |z: &DVector<f64>| DVector::from_fn(z.len(), |i, _| if i < 3 { z[i].max(0.0) } else { 0.0 });
        let res = alternating_max(&md, &b, proj, true, &y, 0.5, None, &AltMaxOptions::default()).unwrap();
        assert!(res.psi_trace.len() >= 2);
        for w in res.psi_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "{:?}", res.psi_trace);
        }
        assert!(res.nu.iter().skip(3).all(|&v| v == 0.0));
        assert!(res.nu.iter().take(3).all(|&v| v >= 0.0));
    }

    #[test]
    fn alternating_max_matches_block_ascent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..5 {
            let (m, k) = (8, 2);
            let l = svec_len(k);
            let md = ModelData {
                alpha: 2.0,
                compressed: DMatrix::from_fn(m, l, |_, _| rng.random_range(-1.0..1.0)),
                cvv: DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0)),
                a_xbar: DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)),
                c_xbar: 0.1,
                tr_xbar: 1.0,
            };
            let b = DVector::from_fn(m, |_, _| rng.random_range(-0.5..0.5));
            let y = DVector::from_fn(m, |_, _| rng.random_range(0.0..0.2));
            let rho = 0.05;
            let proj = |z: &DVector<f64>| DVector::from_fn(z.len(), |i, _| if i < 5 { z[i].max(0.0) } else { 0.0 });
            let res = alternating_max(&md, &b, proj, true, &y, rho, None, &AltMaxOptions::default()).unwrap();
            let phi = psi(&res.point, &res.nu, &y, &b, rho);
            let mut nu = DVector::zeros(m);
            let mut reference = f64::NEG_INFINITY;
            for _ in 0..3000 {
                let sol = ipm_quad(&md.quad_coeffs(&y, &b, &nu, rho), None, &IpmOptions::default()).unwrap();
                let p = md.point(sol.s(), sol.eta());
                nu = proj(&(&b - &p.ax - &y * rho));
                reference = psi(&p, &nu, &y, &b, rho);
            }
            assert!(res.passes < 30, "trial {trial}: {} passes", res.passes);
            assert!((phi - reference).abs() < 1e-6, "trial {trial}: {phi} vs {reference}");
        }
    }
}
