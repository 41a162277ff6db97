//! Binary solver-state container and warm-start padding.
//!
//! Layout (little-endian): magic `USBS`, `u32` version, fingerprint
//! `(n, m, |ℐ|, hash(b))` as four `u64`, then the state fields in a fixed
//! order. Vectors are a `u64` length followed by `f64` values; matrices
//! are `u64` rows, `u64` columns and column-major `f64` data.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{with_columns, BundleModel, PointStats, PrimalStore, SolverConfig, SolverState};
use crate::error::{Error, Result};
use crate::problem::{IndexMapping, SdpProblem};
use crate::sketch::NystromSketch;
use crate::symlin::orthonormalize;

const MAGIC: &[u8; 4] = b"USBS";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint {
    pub n: u64,
    pub m: u64,
    pub num_ineq: u64,
    /// FNV-1a over the little-endian bytes of `b`.
    pub b_hash: u64,
}

pub fn fingerprint(prob: &SdpProblem) -> Fingerprint {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in prob.b.iter() {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    Fingerprint {
        n: prob.n as u64,
        m: prob.m() as u64,
        num_ineq: prob.num_ineq() as u64,
        b_hash: h,
    }
}

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn vec(&mut self, v: &[f64]) -> Result<()> {
        self.u64(v.len() as u64)?;
        v.iter().try_for_each(|&x| self.f64(x))
    }
    fn mat(&mut self, m: &DMatrix<f64>) -> Result<()> {
        self.u64(m.nrows() as u64)?;
        self.u64(m.ncols() as u64)?;
        m.iter().try_for_each(|&x| self.f64(x))
    }
}

struct In<R: Read>(R);

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::StateFormat("file ends early".into())
    } else {
        Error::Io(e)
    }
}

impl<R: Read> In<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(truncated)?;
        Ok(b)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        if v > 1 << 32 {
            return Err(Error::StateFormat(format!("implausible length {v}")));
        }
        Ok(v as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn dvec(&mut self) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.vec()?))
    }
    fn mat(&mut self) -> Result<DMatrix<f64>> {
        let (r, c) = (self.len()?, self.len()?);
        if r.saturating_mul(c) > 1 << 32 {
            return Err(Error::StateFormat(format!("implausible matrix {r}x{c}")));
        }
        let data: Vec<f64> = (0..r * c).map(|_| self.f64()).collect::<Result<_>>()?;
        Ok(DMatrix::from_vec(r, c, data))
    }
}

pub fn write_state(w: impl Write, st: &SolverState, fp: &Fingerprint) -> Result<()> {
    let mut o = Out(w);
    o.0.write_all(MAGIC)?;
    o.0.write_all(&VERSION.to_le_bytes())?;
    for v in [fp.n, fp.m, fp.num_ineq, fp.b_hash] {
        o.u64(v)?;
    }
    o.vec(st.y.as_slice())?;
    o.vec(st.nu.as_slice())?;
    o.f64(st.f_y)?;
    o.f64(st.lambda_y)?;
    for v in [st.iters, st.descent_steps, st.null_steps, st.converged as usize] {
        o.u64(v as u64)?;
    }
    o.f64(st.scale_c)?;
    o.f64(st.scale_x)?;
    o.vec(&st.row_scale)?;
    let md = &st.model;
    o.u64(md.k_c as u64)?;
    o.u64(md.k_p as u64)?;
    o.mat(&md.v)?;
    o.mat(&md.top_w)?;
    o.vec(md.top_lam.as_slice())?;
    o.f64(md.tr_xbar)?;
    o.f64(md.c_xbar)?;
    o.vec(md.a_xbar.as_slice())?;
    match &md.store {
        PrimalStore::Explicit(x) => {
            o.u64(0)?;
            o.mat(x)?;
        }
        PrimalStore::Sketch(s) => {
            o.u64(1)?;
            o.u64(s.seed)?;
            o.mat(&s.p)?;
        }
    }
    match &st.last {
        None => o.u64(0)?,
        Some(p) => {
            o.u64(1)?;
            o.vec(p.ax.as_slice())?;
            o.f64(p.cx)?;
            o.f64(p.trace)?;
        }
    }
    o.0.flush()?;
    Ok(())
}

/// Reads a state and the fingerprint of the problem it was saved for.
pub fn read_state(r: impl Read) -> Result<(SolverState, Fingerprint)> {
    let mut i = In(r);
    if &i.bytes::<4>()? != MAGIC {
        return Err(Error::StateFormat("missing USBS magic".into()));
    }
    let version = u32::from_le_bytes(i.bytes()?);
    if version != VERSION {
        return Err(Error::StateFormat(format!("unsupported version {version}")));
    }
    let fp = Fingerprint {
        n: i.u64()?,
        m: i.u64()?,
        num_ineq: i.u64()?,
        b_hash: i.u64()?,
    };
    let y = i.dvec()?;
    let nu = i.dvec()?;
    let f_y = i.f64()?;
    let lambda_y = i.f64()?;
    let iters = i.len()?;
    let descent_steps = i.len()?;
    let null_steps = i.len()?;
    let converged = i.u64()? != 0;
    let scale_c = i.f64()?;
    let scale_x = i.f64()?;
    let row_scale = i.vec()?;
    let k_c = i.len()?;
    let k_p = i.len()?;
    let v = i.mat()?;
    let top_w = i.mat()?;
    let top_lam = i.dvec()?;
    let tr_xbar = i.f64()?;
    let c_xbar = i.f64()?;
    let a_xbar = i.dvec()?;
    let store = match i.u64()? {
        0 => PrimalStore::Explicit(i.mat()?),
        1 => {
            let seed = i.u64()?;
            PrimalStore::Sketch(NystromSketch::from_parts(seed, i.mat()?, false)?)
        }
        t => return Err(Error::StateFormat(format!("unknown primal storage tag {t}"))),
    };
    let last = match i.u64()? {
        0 => None,
        1 => Some(PointStats {
            ax: i.dvec()?,
            cx: i.f64()?,
            trace: i.f64()?,
        }),
        t => return Err(Error::StateFormat(format!("unknown point tag {t}"))),
    };
    let mut rest = [0u8; 1];
    if i.0.read(&mut rest)? != 0 {
        return Err(Error::StateFormat("trailing bytes".into()));
    }
    let (n, m) = (fp.n as usize, fp.m as usize);
    let store_n = match &store {
        PrimalStore::Explicit(x) => (x.nrows() == n && x.ncols() == n) as usize * n,
        PrimalStore::Sketch(s) => s.n,
    };
    let shapes_ok = y.len() == m
        && nu.len() == m
        && a_xbar.len() == m
        && row_scale.len() == m
        && v.nrows() == n
        && top_w.nrows() == n
        && top_w.ncols() == top_lam.len()
        && store_n == n
        && last.as_ref().is_none_or(|p| p.ax.len() == m);
    if !shapes_ok {
        return Err(Error::StateFormat("field shapes disagree with the fingerprint".into()));
    }
    let model = BundleModel {
        v,
        tr_xbar,
        c_xbar,
        a_xbar,
        store,
        k_c,
        k_p,
        top_w,
        top_lam,
    };
    Ok((
        SolverState {
            y,
            nu,
            f_y,
            lambda_y,
            iters,
            descent_steps,
            null_steps,
            converged,
            model,
            last,
            residuals: None,
            ipm: None,
            scale_c,
            scale_x,
            row_scale,
        },
        fp,
    ))
}

pub fn save_state(path: impl AsRef<Path>, st: &SolverState, prob: &SdpProblem) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_state(std::io::BufWriter::new(f), st, &fingerprint(prob))
}

/// Loads a state for `prob`. With a mapping the state is padded into the
/// problem; without one the fingerprints must agree.
pub fn load_state(
    path: impl AsRef<Path>,
    prob: &SdpProblem,
    mapping: Option<&IndexMapping>,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let f = std::fs::File::open(path)?;
    let (st, fp) = read_state(std::io::BufReader::new(f))?;
    match mapping {
        Some(map) => warm_start_pad(&st, prob, map, cfg),
        None => {
            let want = fingerprint(prob);
            if fp != want {
                return Err(Error::FingerprintMismatch(format!(
                    "state has n = {}, m = {}, |I| = {}, hash {:016x}; problem has n = {}, m = {}, |I| = {}, hash {:016x}",
                    fp.n, fp.m, fp.num_ineq, fp.b_hash, want.n, want.m, want.num_ineq, want.b_hash
                )));
            }
            Ok(st)
        }
    }
}

/// Embeds a state into a larger (or re-indexed) problem: `y` is carried
/// over in original units and zero on new rows, `X̄` and the basis get zero
/// rows on new indices, and `X̄` is rescaled to the new primal scaling
/// (and shrunk if its trace would exceed `α`).
pub fn warm_start_pad(
    prev: &SolverState,
    prob: &SdpProblem,
    map: &IndexMapping,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let (old_n, old_m) = (prev.model.n(), prev.y.len());
    map.validate(old_n, old_m, prob.n, prob.m())?;
    let n = prob.n;
    let identity = old_n == n
        && old_m == prob.m()
        && map.primal.iter().enumerate().all(|(i, &p)| i == p)
        && map.constraints.iter().enumerate().all(|(i, &c)| c == Some(i))
        && prev.scale_x == prob.scale_x
        && prev.scale_c == prob.scale_c
        && prev.row_scale == prob.row_scale;
    if identity {
        return Ok(prev.clone());
    }
    let mut y = DVector::zeros(prob.m());
    for (i, c) in map.constraints.iter().enumerate() {
        if let Some(j) = *c {
            let v = prev.y[i] * prev.scale_c * prev.row_scale[i] / (prob.scale_c * prob.row_scale[j]);
            y[j] = if prob.is_ineq(j) { v.max(0.0) } else { v };
        }
    }
    let embed = |a: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(n, a.ncols());
        for (i, &p) in map.primal.iter().enumerate() {
            out.row_mut(p).copy_from(&a.row(i));
        }
        out
    };
    let s = prev.scale_x / prob.scale_x;
    let (u, lam) = prev.model.xbar_factor();
    let mut lam = lam * s;
    let top_lam = &prev.model.top_lam * s;
    let total = lam.sum() + top_lam.sum();
    if total > prob.alpha {
        lam *= prob.alpha / total;
    }
    let (kc, kp) = cfg.ranks(n);
    let v = match orthonormalize(&embed(&prev.model.v)) {
        Ok(q) => with_columns(&q, kc + kp),
        Err(Error::EmptyBasis) => with_columns(&DMatrix::zeros(n, 0), kc + kp),
        Err(e) => return Err(e),
    };
    let mut model = BundleModel::new(v, prob.m(), kc, kp, super::empty_store(n, cfg)?);
    model.set_xbar(prob, &embed(&u), &lam, model.store.clone())?;
    model.top_w = embed(&prev.model.top_w);
    model.top_lam = top_lam;
    Ok(SolverState {
        nu: DVector::zeros(prob.m()),
        y,
        f_y: f64::INFINITY,
        lambda_y: f64::NAN,
        iters: 0,
        descent_steps: 0,
        null_steps: 0,
        converged: false,
        model,
        last: None,
        residuals: None,
        ipm: None,
        scale_c: prob.scale_c,
        scale_x: prob.scale_x,
        row_scale: prob.row_scale.clone(),
    })
}
