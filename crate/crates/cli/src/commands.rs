use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use usbs::bundle::{load_state, save_state, usbs_solve_with, SolverConfig, Status};
use usbs::problem::{
    build_maxcut, build_qap, parse_graph_mm, parse_mapping, parse_qaplib, write_graph_mm, write_mapping, write_qaplib,
    GraphInstance, IndexMapping, QapInstance, SdpProblem,
};
use usbs::rounding::{maxcut_round, qap_round, relative_gap, BestGap};

use crate::config::parse_config;
use crate::{CliError, Instance, PerturbArgs, ProblemArg, RoundArgs, SolveArgs};

pub const CSV_HEADER: &str = "iter,time_s,f_y,rel_subopt,rel_infeas,linf_infeas,dual_feas,step,rounded";

enum Loaded {
    MaxCut(GraphInstance),
    Qap(QapInstance),
}

impl Loaded {
    fn build(&self) -> Result<SdpProblem, CliError> {
        Ok(match self {
            Loaded::MaxCut(g) => build_maxcut(g)?,
            Loaded::Qap(q) => build_qap(q)?,
        })
    }

    fn defaults(&self) -> SolverConfig {
        match self {
            Loaded::MaxCut(_) => SolverConfig::maxcut(),
            Loaded::Qap(q) => SolverConfig::qap(q.size),
        }
    }

    /// Rounds a primal factor; returns the instance objective and the
    /// relative gap when an optimum is known.
    fn round(&self, u: &usbs::nalgebra::DMatrix<f64>) -> Result<Rounded, CliError> {
        Ok(match self {
            Loaded::MaxCut(g) => {
                let c = maxcut_round(u, g)?;
                Rounded::Cut(c.value, c.x)
            }
            Loaded::Qap(q) => {
                let p = qap_round(u, q)?;
                Rounded::Perm(p.objective, p.perm, p.relative_gap)
            }
        })
    }
}

enum Rounded {
    Cut(f64, Vec<i8>),
    Perm(f64, Vec<usize>, Option<f64>),
}

impl Rounded {
    fn value(&self) -> f64 {
        match self {
            Rounded::Cut(v, _) | Rounded::Perm(v, _, _) => *v,
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn load(inst: &Instance, optimum: Option<f64>) -> Result<Loaded, CliError> {
    require_file(&inst.input, "input")?;
    Ok(match inst.problem {
        ProblemArg::Maxcut => Loaded::MaxCut(parse_graph_mm(&inst.input)?),
        ProblemArg::Qap => {
            let mut q = parse_qaplib(&inst.input)?;
            q.known_optimum = optimum;
            Loaded::Qap(q)
        }
    })
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Solver(e.into())
}

pub fn solve(a: &SolveArgs) -> Result<u8, CliError> {
    let file = match &a.config {
        Some(p) => parse_config(p)?,
        None => Default::default(),
    };
    let inst = load(&a.instance, a.optimum)?;
    let cfg = a.overrides().or(file).apply(inst.defaults())?;
    let prob = inst.build()?;
    let init = match &a.warm_start {
        None => None,
        Some(path) => {
            require_file(path, "warm-start state")?;
            let map = match &a.mapping {
                None => None,
                Some(mp) => {
                    require_file(mp, "mapping")?;
                    let (map, n, m) = parse_mapping(mp)?;
                    if (n, m) != (prob.n, prob.m()) {
                        return Err(CliError::Data(format!(
                            "mapping targets n = {n}, m = {m}; instance has n = {}, m = {}",
                            prob.n,
                            prob.m()
                        )));
                    }
                    Some(map)
                }
            };
            Some(load_state(path, &prob, map.as_ref(), &cfg)?)
        }
    };
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut out = BufWriter::new(sink);
    writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
    let mut failure: Option<CliError> = None;
    let mut best_gap = BestGap::default();
    let mut last_round: Option<Rounded> = None;
    let solved = usbs_solve_with(&prob, &cfg, init, |r| {
        if failure.is_some() {
            return;
        }
        let rounded = if a.round {
            match inst.round(&r.model.primal_factor().0) {
                Ok(x) => {
                    if let Rounded::Perm(_, _, Some(g)) = &x {
                        best_gap.push(*g);
                    }
                    let v = x.value();
                    last_round = Some(x);
                    v.to_string()
                }
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            }
        } else {
            String::new()
        };
        let res = r.residuals;
        let line = writeln!(
            out,
            "{},{:.6},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.iter,
            r.elapsed.as_secs_f64(),
            prob.original_objective(r.f_y),
            res.rel_subopt,
            res.rel_infeas,
            res.linf_infeas,
            res.dual_feas,
            if r.descent { "descent" } else { "null" },
            rounded
        );
        if let Err(e) = line {
            failure = Some(io_err(e));
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    out.flush().map_err(io_err)?;
    drop(out);
    let st = &solved.state;
    if let Some(p) = &a.save_state {
        save_state(p, st, &prob)?;
    }
    eprintln!(
        "status: {}",
        match solved.status {
            Status::Converged => "converged",
            Status::IterationLimit => "iteration limit",
            Status::TimeLimit => "time limit",
        }
    );
    eprintln!("iterations: {} ({} descent, {} null)", st.iters, st.descent_steps, st.null_steps);
    if let Some(obj) = st.primal_objective(&prob) {
        eprintln!("primal objective: {obj}");
    }
    if let Some(r) = &st.residuals {
        eprintln!("rel_subopt: {:e}  rel_infeas: {:e}", r.rel_subopt, r.rel_infeas);
    }
    match &last_round {
        Some(Rounded::Cut(v, _)) => eprintln!("rounded cut value: {v}"),
        Some(Rounded::Perm(v, _, _)) => {
            eprintln!("rounded objective: {v}");
            if let Some(g) = best_gap.best() {
                eprintln!("best relative gap: {g}");
            }
        }
        None => {}
    }
    Ok(match solved.status {
        Status::Converged => 0,
        _ => 2,
    })
}

pub fn round(a: &RoundArgs) -> Result<(), CliError> {
    let inst = load(&a.instance, a.optimum)?;
    let prob = inst.build()?;
    require_file(&a.state, "state")?;
    let st = load_state(&a.state, &prob, None, &inst.defaults())?;
    let (u, _) = st.primal_factor();
    match inst.round(&u)? {
        Rounded::Cut(v, x) => {
            println!("cut value: {v}");
            let s: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            println!("partition: {}", s.join(" "));
        }
        Rounded::Perm(v, perm, gap) => {
            let s: Vec<String> = perm.iter().map(|p| (p + 1).to_string()).collect();
            println!("permutation: {}", s.join(" "));
            println!("objective: {v}");
            if let Some(o) = a.optimum {
                println!("relative gap: {}", gap.unwrap_or_else(|| relative_gap(v, o)));
            }
        }
    }
    Ok(())
}

pub fn perturb(a: &PerturbArgs) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&a.fraction) {
        return Err(CliError::Usage(format!("fraction must lie in [0, 1), got {}", a.fraction)));
    }
    let inst = load(&a.instance, None)?;
    let full = inst.build()?;
    let (text, sub, keep) = match &inst {
        Loaded::MaxCut(g) => {
            let drop = (a.fraction * g.n as f64).ceil() as usize;
            if drop >= g.n {
                return Err(CliError::Usage(format!("dropping {drop} of {} vertices leaves nothing", g.n)));
            }
            let s = g.induced_prefix(g.n - drop);
            (write_graph_mm(&s), build_maxcut(&s)?, s.n)
        }
        Loaded::Qap(q) => {
            let s = q.drop_last()?;
            (write_qaplib(&s), build_qap(&s)?, s.size)
        }
    };
    let map = IndexMapping::from_entity_map(&sub, &full, &(0..keep).collect::<Vec<_>>())?;
    std::fs::write(&a.output, text).map_err(io_err)?;
    std::fs::write(&a.mapping, write_mapping(&map, full.n, full.m())).map_err(io_err)?;
    let total = match &inst {
        Loaded::MaxCut(g) => g.n,
        Loaded::Qap(q) => q.size,
    };
    eprintln!("kept {keep} of {total} entities in {}", a.output.display());
    Ok(())
}
