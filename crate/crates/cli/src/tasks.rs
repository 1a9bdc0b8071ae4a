//! Task resolution and execution.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use mvsde_core::analysis::{
    bihari_bound, convergence_study, estimate_tail, BihariSpec, RateModulus, StudyMode,
};
use mvsde_core::dynamics::{bundle_header, simulate_particles, solve_limit, ModerateScale};
use mvsde_core::f64::{ControlPair, Event, MonteCarlo, Problem, TimeGrid};
use mvsde_core::hypotheses::{check_hypotheses, HypothesisSettings};
use mvsde_core::jumps::ControlField;
use mvsde_core::rate::{lq_oracle, minimize_rate, OptimizerSettings, RateQuery, Regime};
use mvsde_core::skeleton::{
    solve_ldp_skeleton, solve_mdp_skeleton, BrownianControl, MdpConstraint, MdpSkeleton,
};
use rayon::prelude::*;

use crate::build;
use crate::config::Resolver;
use crate::error::CliError;

#[derive(Debug, Clone)]
pub enum Task {
    Simulate,
    Limit,
    SkeletonLdp { control: ControlPair, half: bool },
    SkeletonMdp { control: ControlPair, constraint: MdpConstraint },
    Rate { query: RateQuery<f64>, oracle: bool },
    Tail { event: Event, scale: Option<ModerateScale<f64>> },
    Converge { mode: StudyMode<f64> },
    Hypotheses { settings: HypothesisSettings<f64> },
    Bihari { spec: BihariSpec<f64> },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Limit => "limit",
            Task::SkeletonLdp { .. } => "skeleton-ldp",
            Task::SkeletonMdp { .. } => "skeleton-mdp",
            Task::Rate { .. } => "rate",
            Task::Tail { .. } => "tail",
            Task::Converge { .. } => "converge",
            Task::Hypotheses { .. } => "check-hypotheses",
            Task::Bihari { .. } => "bihari",
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Plan {
    pub problem: Option<Problem>,
    pub grid: TimeGrid,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub particles: usize,
    pub replicas: usize,
    pub task: Task,
    pub out_dir: PathBuf,
    pub prefix: String,
    pub resolved: String,
    pub hash: String,
}

impl Plan {
    fn problem(&self) -> &Problem {
        self.problem.as_ref().expect("task resolved with a problem")
    }

    fn monte_carlo(&self) -> MonteCarlo {
        MonteCarlo {
            grid: self.grid,
            replicas: self.replicas,
            particles: self.particles,
            seed: self.seed,
        }
    }
}

fn regime(r: &mut Resolver) -> Result<Regime, CliError> {
    match r.require("task.regime")?.as_str() {
        "ldp" => Ok(Regime::Ldp),
        "mdp" => Ok(Regime::Mdp),
        other => Err(CliError::Config(format!("`task.regime`: unknown regime `{other}`"))),
    }
}

fn constraint(r: &mut Resolver) -> Result<MdpConstraint, CliError> {
    match r.require("task.constraint")?.as_str() {
        "interior" => Ok(MdpConstraint::Interior),
        "projected" => Ok(MdpConstraint::Projected),
        other => Err(CliError::Config(format!("`task.constraint`: unknown mode `{other}`"))),
    }
}

fn event(r: &mut Resolver, d: usize) -> Result<Event, CliError> {
    let kind = r.require("task.event")?;
    let vec_d = |r: &mut Resolver, key: &str| -> Result<Vec<f64>, CliError> {
        let v = r.vector(key)?;
        if v.len() != d {
            return Err(CliError::Config(format!("`{key}`: expected {d} values")));
        }
        Ok(v)
    };
    Ok(match kind.as_str() {
        "point" => Event::TerminalPoint(vec_d(r, "task.event.target")?),
        "halfspace" => Event::TerminalHalfspace {
            normal: vec_d(r, "task.event.normal")?,
            level: r.parse("task.event.level")?,
        },
        "sup_norm" => Event::SupNorm {
            threshold: r.parse("task.event.threshold")?,
            relative_to_limit: r.bool("task.event.relative")?,
        },
        other => return Err(CliError::Config(format!("`task.event`: unknown event `{other}`"))),
    })
}

/// `task.phi` and `task.psi`; `psi = null` is the null control of the regime.
fn control(r: &mut Resolver, problem: &Problem, grid: TimeGrid, reg: Regime) -> Result<ControlPair, CliError> {
    let d = problem.dim();
    let (head, args) = r.tagged("task.phi")?;
    let phi = match head.as_str() {
        "zero" if args.is_empty() => BrownianControl::zero(grid, d),
        "constant" if args.len() == d => BrownianControl::constant(grid, &args),
        _ => {
            return Err(CliError::Config(format!(
                "`task.phi`: expected `zero` or `constant` with {d} values"
            )))
        }
    };
    let (head, args) = r.tagged("task.psi")?;
    let n = problem.n_marks();
    let psi = match (head.as_str(), args.as_slice()) {
        ("null", []) => match reg {
            Regime::Ldp => ControlPair::null_ldp(grid, d, n).psi,
            Regime::Mdp => ControlPair::null_mdp(grid, d, n).psi,
        },
        ("constant", [c]) if n > 0 => Some(ControlField::constant(grid, n, *c)),
        ("constant", [_]) => {
            return Err(CliError::Config("`task.psi`: the problem has no mark space".into()))
        }
        _ => return Err(CliError::Config("`task.psi`: expected `null` or `constant c`".into())),
    };
    Ok(ControlPair { phi, psi })
}

fn positive_usize(r: &mut Resolver, key: &str) -> Result<usize, CliError> {
    let v: usize = r.parse(key)?;
    if v == 0 {
        return Err(CliError::Config(format!("`{key}` must be positive")));
    }
    Ok(v)
}

/// Resolve and validate everything without running anything.
pub fn resolve(mut r: Resolver) -> Result<Plan, CliError> {
    let kind = r.require("task.kind")?;
    let seed: u64 = r.parse("run.seed")?;
    let grid = build::grid(&mut r)?;
    let needs_problem = kind != "bihari";
    let problem = if needs_problem { Some(build::problem(&mut r)?) } else { None };
    let (mut epsilons, mut particles, mut replicas) = (Vec::new(), 1, 1);
    if matches!(kind.as_str(), "simulate" | "tail" | "converge") {
        epsilons = r.vector("run.epsilon")?;
        if epsilons.is_empty() {
            return Err(CliError::Config("`run.epsilon` is empty".into()));
        }
        particles = positive_usize(&mut r, "run.particles")?;
        replicas = positive_usize(&mut r, "run.replicas")?;
    }
    if kind == "simulate" && epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(CliError::Config("`run.epsilon`: values must lie in [0, 1]".into()));
    }
    let task = match kind.as_str() {
        "simulate" => Task::Simulate,
        "limit" => Task::Limit,
        "skeleton-ldp" => {
            let p = problem.as_ref().expect("problem");
            Task::SkeletonLdp {
                control: control(&mut r, p, grid, Regime::Ldp)?,
                half: r.bool("task.half_q2")?,
            }
        }
        "skeleton-mdp" => {
            let p = problem.as_ref().expect("problem");
            Task::SkeletonMdp {
                control: control(&mut r, p, grid, Regime::Mdp)?,
                constraint: constraint(&mut r)?,
            }
        }
        "rate" => {
            let p = problem.as_ref().expect("problem");
            let reg = regime(&mut r)?;
            let settings = OptimizerSettings {
                iterations: positive_usize(&mut r, "task.iterations")?,
                restarts: r.parse("task.restarts")?,
                rounds: positive_usize(&mut r, "task.rounds")?,
                penalty0: r.parse("task.penalty0")?,
                residual_tol: r.parse("task.residual_tol")?,
                cell_factor: positive_usize(&mut r, "task.cell_factor")?,
                seed,
                ..OptimizerSettings::default()
            };
            let query = RateQuery {
                regime: reg,
                event: event(&mut r, p.dim())?,
                settings,
                half: r.bool("task.half_q2")?,
                constraint: constraint(&mut r)?,
            };
            let oracle = r.bool("task.oracle")?;
            if oracle && !(reg == Regime::Mdp && matches!(query.event, Event::TerminalPoint(_))) {
                return Err(CliError::Config(
                    "`task.oracle` needs task.regime = mdp and a point event".into(),
                ));
            }
            Task::Rate { query, oracle }
        }
        "tail" => {
            let p = problem.as_ref().expect("problem");
            let scale = match regime(&mut r)? {
                Regime::Ldp => None,
                Regime::Mdp => Some(ModerateScale::new(r.parse("run.theta")?)?),
            };
            Task::Tail {
                event: event(&mut r, p.dim())?,
                scale,
            }
        }
        "converge" => {
            let mode = match r.require("task.mode")?.as_str() {
                "limit" => StudyMode::Limit,
                "rate" => StudyMode::Rate,
                "controlled" => {
                    let p = problem.as_ref().expect("problem");
                    StudyMode::Controlled(control(&mut r, p, grid, Regime::Ldp)?)
                }
                other => return Err(CliError::Config(format!("`task.mode`: unknown mode `{other}`"))),
            };
            Task::Converge { mode }
        }
        "check-hypotheses" => Task::Hypotheses {
            settings: HypothesisSettings {
                samples: positive_usize(&mut r, "task.samples")?,
                seed,
                atoms: positive_usize(&mut r, "task.atoms")?,
                grid,
                scale: ModerateScale::new(r.parse("run.theta")?)?,
                c0_constant: r.parse("task.c0_constant")?,
                c0_power: r.parse("task.c0_power")?,
            },
        },
        "bihari" => {
            let (head, args) = r.tagged("task.rho")?;
            let modulus = match head.as_str() {
                "power" if args.len() == 2 => RateModulus::Power {
                    scale: args[0],
                    exponent: args[1],
                },
                "power" => return Err(CliError::Config("`task.rho`: power takes scale and exponent".into())),
                _ => RateModulus::Concave(build::concave_modulus("task.rho", &head, &args)?),
            };
            let q: f64 = r.parse("task.q")?;
            Task::Bihari {
                spec: BihariSpec {
                    c: r.parse("task.c")?,
                    q: vec![q; grid.steps() + 1],
                    modulus,
                    grid,
                },
            }
        }
        other => return Err(CliError::Config(format!("`task.kind`: unknown task `{other}`"))),
    };
    let out_dir = PathBuf::from(r.require("output.dir")?);
    let prefix = r.get("output.prefix").unwrap_or_default();
    Ok(Plan {
        problem,
        grid,
        seed,
        epsilons,
        particles,
        replicas,
        task,
        out_dir,
        prefix,
        resolved: r.resolved_text(),
        hash: r.content_hash(),
    })
}

/// Result of a run: the one-line summary and the files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// Set when the task ran but its answer is a numerical failure (infeasible event).
    pub numerical_failure: bool,
}

struct Writer<'a> {
    plan: &'a Plan,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.plan.out_dir.join(format!("{}{name}", self.plan.prefix));
        let f = BufWriter::new(File::create(&path)?);
        self.files.push(path);
        Ok(f)
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut f = self.create(&format!("{name}.csv"))?;
        write(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

pub fn manifest_text(plan: &Plan) -> String {
    format!(
        "# mvsde manifest for task {}\n# content-hash = {}\n{}",
        plan.task.name(),
        plan.hash,
        plan.resolved
    )
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn add(s: &mut String, kv: String) {
    s.push(' ');
    s.push_str(&kv);
}

pub fn execute(plan: &Plan) -> Result<Outcome, CliError> {
    fs::create_dir_all(&plan.out_dir)?;
    let mut w = Writer { plan, files: Vec::new() };
    let mut numerical_failure = false;
    let mut summary = format!("task={}", plan.task.name());
    match &plan.task {
        Task::Simulate => {
            let p = plan.problem();
            let mc = plan.monte_carlo();
            let mut max_norm = 0f64;
            let mut exits = 0usize;
            for (i, &eps) in plan.epsilons.iter().enumerate() {
                let bundles = (0..plan.replicas)
                    .into_par_iter()
                    .map(|r| simulate_particles(p, plan.grid, eps, plan.particles, mc.replica_seed(r)))
                    .collect::<Result<Vec<_>, _>>()?;
                w.csv(&format!("paths_eps{i}"), |f| {
                    writeln!(f, "epsilon,{}", bundle_header(p.dim()))?;
                    for (r, b) in bundles.iter().enumerate() {
                        let mut buf = Vec::new();
                        b.write_csv(&mut buf, r, false)?;
                        for line in String::from_utf8_lossy(&buf).lines() {
                            writeln!(f, "{eps},{line}")?;
                        }
                    }
                    Ok(())
                })?;
                if let Some(model) = &p.jumps {
                    w.csv(&format!("jumps_eps{i}"), |f| {
                        writeln!(f, "epsilon,replica,particle,time,mark_index,mark_value")?;
                        for (r, b) in bundles.iter().enumerate() {
                            for (j, log) in b.jump_logs.iter().enumerate() {
                                for e in &log.events {
                                    let z = model.marks()[e.mark_index];
                                    writeln!(f, "{eps},{r},{j},{},{},{z}", e.time, e.mark_index)?;
                                }
                            }
                        }
                        Ok(())
                    })?;
                }
                for b in &bundles {
                    max_norm = max_norm.max(b.max_state_norm());
                    exits += b.jump_exits;
                }
            }
            add(&mut summary, format!("epsilons={}", fmt_list(&plan.epsilons)));
            add(&mut summary, format!("replicas={} particles={}", plan.replicas, plan.particles));
            add(&mut summary, format!("max_norm={max_norm} jump_exits={exits}"));
        }
        Task::Limit => {
            let b = solve_limit(plan.problem(), plan.grid)?;
            w.csv("limit", |f| b.write_csv(f, 0, true))?;
            add(&mut summary, format!("terminal={}", fmt_list(b.states[0].last())));
        }
        Task::SkeletonLdp { control, half } => {
            let limit = solve_limit(plan.problem(), plan.grid)?;
            let s = solve_ldp_skeleton(plan.problem(), &limit, control, *half)?;
            w.csv("skeleton", |f| s.write_csv(f))?;
            add(&mut summary, format!("q1={} q2={} cost={}", s.q1, s.q2, s.cost));
            add(&mut summary, format!("terminal={}", fmt_list(s.path.last())));
        }
        Task::SkeletonMdp { control, constraint } => {
            let limit = solve_limit(plan.problem(), plan.grid)?;
            let s = solve_mdp_skeleton(plan.problem(), &limit, control, *constraint)?;
            w.csv("skeleton", |f| s.write_csv(f))?;
            add(&mut summary, format!("q1={} q2={} cost={}", s.q1, s.q2, s.cost));
            add(&mut summary, format!("terminal={}", fmt_list(s.path.last())));
        }
        Task::Rate { query, oracle } => {
            let p = plan.problem();
            let limit = solve_limit(p, plan.grid)?;
            let res = minimize_rate(query, p, &limit)?;
            w.csv("rate", |f| res.write_csv(f))?;
            w.csv("control_phi", |f| res.control.phi.write_csv(f))?;
            if let Some(psi) = &res.control.psi {
                w.csv("control_psi", |f| psi.write_csv(f))?;
            }
            w.csv("trace", |f| {
                writeln!(f, "iteration,value")?;
                for (i, v) in res.diagnostics.trace.iter().enumerate() {
                    writeln!(f, "{i},{v}")?;
                }
                Ok(())
            })?;
            add(&mut summary, format!("rate={} residual={} feasible={}", res.value, res.residual, res.feasible));
            add(&mut summary, format!("converged={}", res.diagnostics.converged));
            if *oracle {
                if let Event::TerminalPoint(v) = &query.event {
                    let skel = MdpSkeleton::new(p, &limit, query.constraint)?;
                    let lq = lq_oracle(&skel, v, query.settings.cell_factor)?;
                    let rel = (res.value - lq.value).abs() / lq.value.abs().max(f64::MIN_POSITIVE);
                    add(&mut summary, format!("oracle={} relative_gap={rel}", lq.value));
                }
            }
            numerical_failure = !res.feasible;
        }
        Task::Tail { event, scale } => {
            let est = estimate_tail(plan.problem(), event, &plan.epsilons, &plan.monte_carlo(), scale.as_ref())?;
            w.csv("tail", |f| est.write_csv(f))?;
            let fit = &est.fit;
            add(&mut summary, format!("rate_estimate={} rate_se={}", -fit.intercept, fit.intercept_se));
            add(&mut summary, format!("slope={} slope_se={}", fit.slope, fit.slope_se));
            add(&mut summary, format!("used={}", est.rows.iter().filter(|r| r.used).count()));
        }
        Task::Converge { mode } => {
            let rep = convergence_study(plan.problem(), &plan.epsilons, &plan.monte_carlo(), mode)?;
            w.csv("convergence", |f| rep.write_csv(f))?;
            add(&mut summary, format!("slope={} slope_se={}", rep.fit.slope, rep.fit.slope_se));
            add(&mut summary, format!("decreasing={}", rep.strictly_decreasing()));
            if let Some(c) = rep.c_hat {
                add(&mut summary, format!("c_hat={c}"));
            }
        }
        Task::Hypotheses { settings } => {
            let rep = check_hypotheses(plan.problem(), settings)?;
            w.csv("hypotheses", |f| rep.write_csv(f))?;
            let failed: Vec<&str> = rep.rows.iter().filter(|r| !r.pass).map(|r| r.hypothesis).collect();
            add(&mut summary, format!("all_pass={}", rep.all_pass()));
            add(&mut summary, format!("failed={}", if failed.is_empty() { "none".into() } else { failed.join(";") }));
        }
        Task::Bihari { spec } => {
            let b = bihari_bound(spec)?;
            w.csv("bihari", |f| b.write_csv(f))?;
            add(&mut summary, format!("terminal_bound={}", b.bound.last().copied().unwrap_or(f64::NAN)));
        }
    }
    let mut m = w.create("manifest.txt")?;
    m.write_all(manifest_text(plan).as_bytes())?;
    m.flush()?;
    Ok(Outcome {
        summary,
        files: w.files,
        numerical_failure,
    })
}
