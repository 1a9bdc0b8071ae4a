//! Rate-function evaluation: control costs, a derivative-free minimiser over piecewise-constant
//! controls, and the minimum-energy oracle for the linear MDP skeleton.

use std::io::{self, Write};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{PathBundle, Problem};
use crate::error::{check_dim, Error, Result};
use crate::grid::{Path, TimeGrid};
use crate::jumps::{q2, ControlField, JumpModel};
use crate::linalg::{self, Matrix};
use crate::rng;
use crate::scalar::Scalar;
use crate::skeleton::{q1, BrownianControl, ControlPair, LdpSkeleton, MdpConstraint, MdpSkeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Ldp,
    Mdp,
}

/// Target set for the terminal value or the whole path. In the MDP regime the event refers to
/// the deviation `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum Event<T> {
    /// `Y_T = target`
    TerminalPoint(Vec<T>),
    /// `<normal, Y_T> >= level`
    TerminalHalfspace { normal: Vec<T>, level: T },
    /// `sup_t |Y_t - r_t| >= threshold`, with `r = X⁰` when `relative_to_limit` and `r = 0`
    /// otherwise.
    SupNorm { threshold: T, relative_to_limit: bool },
}

impl<T: Scalar> Event<T> {
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Event::TerminalPoint(v) => check_dim(dim, v.len()),
            Event::TerminalHalfspace { normal, .. } => {
                check_dim(dim, normal.len())?;
                if linalg::norm(normal) == T::zero() {
                    return Err(Error::invalid("halfspace normal must be nonzero"));
                }
                Ok(())
            }
            Event::SupNorm { threshold, .. } => {
                if !(*threshold >= T::zero()) {
                    return Err(Error::invalid("sup-norm threshold must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    fn is_equality(&self) -> bool {
        matches!(self, Event::TerminalPoint(_))
    }

    /// Constraint value: a residual vector for point targets, or a single `g` with the event
    /// meaning `g <= 0`.
    fn constraint(&self, path: &Path<T>, reference: Option<&Path<T>>, out: &mut Vec<T>) {
        out.clear();
        let last = path.last();
        match self {
            Event::TerminalPoint(v) => out.extend(last.iter().zip(v).map(|(&a, &b)| a - b)),
            Event::TerminalHalfspace { normal, level } => out.push(*level - linalg::dot(normal, last)),
            Event::SupNorm { threshold, .. } => {
                let sup = match reference {
                    Some(r) => path.sup_distance(r),
                    None => path.sup_norm(),
                };
                out.push(*threshold - sup);
            }
        }
    }

    fn residual(&self, c: &[T]) -> T {
        if self.is_equality() {
            linalg::norm(c)
        } else {
            c[0].max(T::zero())
        }
    }

    /// True when the terminal point `y` lies in the event. Sup-norm events need the whole path
    /// and always report false here.
    pub fn contains_terminal(&self, y: &[T], tol: T) -> bool {
        match self {
            Event::TerminalPoint(v) => linalg::dist(y, v) <= tol,
            Event::TerminalHalfspace { normal, level } => linalg::dot(normal, y) >= *level - tol,
            Event::SupNorm { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings<T> {
    /// Pattern-search iterations per continuation round and start.
    pub iterations: usize,
    /// Random starts in addition to the null control.
    pub restarts: usize,
    pub penalty0: T,
    pub penalty_growth: T,
    pub rounds: usize,
    pub initial_step: T,
    pub min_step: T,
    /// Accepted event residual.
    pub residual_tol: T,
    /// Simulation steps per control cell.
    pub cell_factor: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for OptimizerSettings<T> {
    fn default() -> Self {
        OptimizerSettings {
            iterations: 2000,
            restarts: 3,
            penalty0: T::lit(100.0),
            penalty_growth: T::lit(10.0),
            rounds: 4,
            initial_step: T::lit(0.5),
            min_step: T::lit(1e-9),
            residual_tol: T::lit(1e-5),
            cell_factor: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateQuery<T> {
    pub regime: Regime,
    pub event: Event<T>,
    pub settings: OptimizerSettings<T>,
    /// Apply the ½ factor to `Q₂` (LDP only).
    pub half: bool,
    pub constraint: MdpConstraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T> {
    pub evaluations: usize,
    pub iterations: usize,
    pub starts: usize,
    pub converged: bool,
    /// Best value of every start, in start order (`+∞` when a start ended infeasible).
    pub trace: Vec<T>,
    pub winning_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult<T> {
    /// Control cost of the returned control, `+∞` when the event is out of reach.
    pub value: T,
    pub control: ControlPair<T>,
    pub residual: T,
    pub feasible: bool,
    pub diagnostics: Diagnostics<T>,
}

impl<T: Scalar> RateResult<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "value,residual,feasible,converged,evaluations,iterations,starts,winning_start")?;
        let d = &self.diagnostics;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            self.value,
            self.residual,
            self.feasible,
            d.converged,
            d.evaluations,
            d.iterations,
            d.starts,
            d.winning_start
        )
    }
}

/// `Q₁(φ) + Q₂(ψ)` (LDP) or `½∫|φ|² + ½∫∫|ψ|² ν ds` (MDP).
pub fn control_cost<T: Scalar>(
    u: &ControlPair<T>,
    regime: Regime,
    model: Option<&JumpModel<T>>,
    half: bool,
) -> Result<T> {
    let psi_part = match (&u.psi, model) {
        (Some(psi), Some(model)) => match regime {
            Regime::Ldp => q2(psi, model, half)?,
            Regime::Mdp => mdp_q2(psi, model)?,
        },
        (Some(psi), None) if psi.n_marks() > 0 => {
            return Err(Error::GridMismatch("jump control supplied without a jump model".into()))
        }
        _ => T::zero(),
    };
    Ok(q1(&u.phi) + psi_part)
}

fn mdp_q2<T: Scalar>(psi: &ControlField<T>, model: &JumpModel<T>) -> Result<T> {
    check_dim(model.n_marks(), psi.n_marks())?;
    let dt = psi.grid().dt();
    let s: T = (0..psi.grid().steps())
        .map(|k| {
            psi.cell(k)
                .iter()
                .zip(model.weights())
                .map(|(&p, &w)| p * p * w)
                .sum::<T>()
        })
        .sum();
    Ok(T::lit(0.5) * s * dt)
}

/// Decision-vector layout: per control cell, `d` Brownian values then one value per mark.
#[derive(Debug, Clone, Copy)]
struct Layout {
    dim: usize,
    marks: usize,
    cells: usize,
    factor: usize,
}

impl Layout {
    fn width(&self) -> usize {
        self.dim + self.marks
    }

    fn len(&self) -> usize {
        self.cells * self.width()
    }

    fn expand<T: Scalar>(&self, grid: TimeGrid<T>, x: &[T], regime: Regime) -> ControlPair<T> {
        let steps = grid.steps();
        let mut phi = Vec::with_capacity(steps * self.dim);
        let mut psi = Vec::with_capacity(steps * self.marks);
        for k in 0..steps {
            let cell = &x[(k / self.factor) * self.width()..][..self.width()];
            phi.extend_from_slice(&cell[..self.dim]);
            psi.extend(cell[self.dim..].iter().map(|&v| match regime {
                Regime::Ldp => v.exp(),
                Regime::Mdp => v,
            }));
        }
        ControlPair {
            phi: BrownianControl::new(grid, self.dim, phi).expect("layout matches grid"),
            psi: (self.marks > 0)
                .then(|| ControlField::new(grid, self.marks, psi).expect("layout matches grid")),
        }
    }
}

enum Solver<'a, T> {
    Ldp(LdpSkeleton<'a, T>),
    Mdp(MdpSkeleton<T>),
}

struct Objective<'a, T> {
    solver: Solver<'a, T>,
    event: &'a Event<T>,
    layout: Layout,
    grid: TimeGrid<T>,
    regime: Regime,
    model: Option<&'a JumpModel<T>>,
    half: bool,
    reference: Option<Path<T>>,
}

/// Cost and constraint of one decision vector.
struct Evaluation<T> {
    cost: T,
    constraint: Vec<T>,
}

impl<'a, T: Scalar> Objective<'a, T> {
    fn evaluate(&self, x: &[T]) -> Result<Evaluation<T>> {
        let u = self.layout.expand(self.grid, x, self.regime);
        let path = match &self.solver {
            Solver::Ldp(s) => s.solve(&u)?.path,
            Solver::Mdp(s) => s.solve(&u)?.path,
        };
        let mut constraint = Vec::new();
        self.event.constraint(&path, self.reference.as_ref(), &mut constraint);
        let cost = control_cost(&u, self.regime, self.model, self.half)?;
        Ok(Evaluation { cost, constraint })
    }

    /// Augmented Lagrangian with multipliers `lam` and penalty `p`.
    fn merit(&self, e: &Evaluation<T>, lam: &[T], p: T) -> T {
        let two = T::lit(2.0);
        if self.event.is_equality() {
            e.cost
                + e.constraint
                    .iter()
                    .zip(lam)
                    .map(|(&c, &l)| l * c + p * c * c)
                    .sum::<T>()
        } else {
            let g = e.constraint[0];
            let l = lam[0];
            let s = (l + two * p * g).max(T::zero());
            e.cost + (s * s - l * l) / (T::lit(4.0) * p)
        }
    }

    fn update_multipliers(&self, e: &Evaluation<T>, lam: &mut [T], p: T) {
        let two = T::lit(2.0);
        if self.event.is_equality() {
            for (l, &c) in lam.iter_mut().zip(&e.constraint) {
                *l += two * p * c;
            }
        } else {
            lam[0] = (lam[0] + two * p * e.constraint[0]).max(T::zero());
        }
    }
}

struct SearchOutcome<T> {
    x: Vec<T>,
    f: T,
    evaluations: usize,
    iterations: usize,
    converged: bool,
}

/// Hooke-Jeeves pattern search with step halving.
fn pattern_search<T: Scalar>(
    f: &mut dyn FnMut(&[T]) -> Result<T>,
    x0: Vec<T>,
    step0: T,
    min_step: T,
    max_iter: usize,
) -> Result<SearchOutcome<T>> {
    let mut evaluations = 0;
    let mut eval = |x: &[T], evaluations: &mut usize| -> Result<T> {
        *evaluations += 1;
        let v = f(x)?;
        Ok(if v.is_finite() { v } else { T::infinity() })
    };
    let explore = |base: &[T], fbase: T, step: T, evals: &mut usize, eval: &mut dyn FnMut(&[T], &mut usize) -> Result<T>| -> Result<(Vec<T>, T)> {
        let mut x = base.to_vec();
        let mut fx = fbase;
        for i in 0..x.len() {
            let orig = x[i];
            x[i] = orig + step;
            let fp = eval(&x, evals)?;
            if fp < fx {
                fx = fp;
                continue;
            }
            x[i] = orig - step;
            let fm = eval(&x, evals)?;
            if fm < fx {
                fx = fm;
                continue;
            }
            x[i] = orig;
        }
        Ok((x, fx))
    };

    let mut base = x0;
    let mut fbase = eval(&base, &mut evaluations)?;
    let mut step = step0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let (mut x, mut fx) = explore(&base, fbase, step, &mut evaluations, &mut eval)?;
        if fx < fbase {
            loop {
                let pattern: Vec<T> = x.iter().zip(&base).map(|(&a, &b)| a + (a - b)).collect();
                base = x;
                fbase = fx;
                let fp = eval(&pattern, &mut evaluations)?;
                let (x2, f2) = explore(&pattern, fp, step, &mut evaluations, &mut eval)?;
                if f2 < fbase {
                    x = x2;
                    fx = f2;
                } else {
                    break;
                }
            }
        } else {
            step *= T::lit(0.5);
            if step < min_step {
                converged = true;
                break;
            }
        }
    }
    Ok(SearchOutcome {
        x: base,
        f: fbase,
        evaluations,
        iterations,
        converged,
    })
}

struct StartResult<T> {
    x: Vec<T>,
    cost: T,
    residual: T,
    evaluations: usize,
    iterations: usize,
    converged: bool,
}

fn run_start<T: Scalar>(obj: &Objective<'_, T>, x0: Vec<T>, s: &OptimizerSettings<T>) -> Result<StartResult<T>> {
    let ncon = match obj.event {
        Event::TerminalPoint(v) => v.len(),
        _ => 1,
    };
    let mut lam = vec![T::zero(); ncon];
    let mut x = x0;
    let mut p = s.penalty0;
    let mut evaluations = 0;
    let mut iterations = 0;
    let mut converged = true;
    for round in 0..s.rounds {
        let mut f = |z: &[T]| -> Result<T> {
            let e = obj.evaluate(z)?;
            Ok(obj.merit(&e, &lam, p))
        };
        let step = if round == 0 { s.initial_step } else { s.initial_step * T::lit(0.1) };
        let out = pattern_search(&mut f, x, step, s.min_step, s.iterations)?;
        evaluations += out.evaluations;
        iterations += out.iterations;
        converged &= out.converged;
        x = out.x;
        let e = obj.evaluate(&x)?;
        obj.update_multipliers(&e, &mut lam, p);
        if round + 1 < s.rounds {
            p *= s.penalty_growth;
        }
    }
    let e = obj.evaluate(&x)?;
    Ok(StartResult {
        residual: obj.event.residual(&e.constraint),
        cost: e.cost,
        x,
        evaluations,
        iterations,
        converged,
    })
}

/// Smallest reachable event residual, by pattern search on the squared residual.
fn feasibility_scan<T: Scalar>(obj: &Objective<'_, T>, s: &OptimizerSettings<T>, starts: &[Vec<T>]) -> Result<T> {
    let mut best = T::infinity();
    for x0 in starts {
        let mut f = |z: &[T]| -> Result<T> {
            let e = obj.evaluate(z)?;
            let r = obj.event.residual(&e.constraint);
            Ok(r * r)
        };
        let out = pattern_search(&mut f, x0.clone(), s.initial_step * T::lit(4.0), s.min_step, s.iterations / 4 + 1)?;
        best = best.min(out.f.sqrt());
        if best <= s.residual_tol {
            break;
        }
    }
    Ok(best)
}

/// Minimal control cost over piecewise-constant controls whose skeleton reaches the event.
pub fn minimize_rate<T: Scalar>(
    query: &RateQuery<T>,
    problem: &Problem<T>,
    limit: &PathBundle<T>,
) -> Result<RateResult<T>> {
    let s = &query.settings;
    query.event.check(problem.dim())?;
    let grid = limit.grid;
    if s.cell_factor == 0 || !grid.steps().is_multiple_of(s.cell_factor) {
        return Err(Error::GridMismatch(format!(
            "control cell factor {} does not divide {} steps",
            s.cell_factor,
            grid.steps()
        )));
    }
    if s.rounds == 0 || !(s.penalty0 > T::zero()) || !(s.penalty_growth >= T::one()) {
        return Err(Error::invalid("penalty schedule needs rounds >= 1, penalty0 > 0, growth >= 1"));
    }
    let has_marks = problem.has_jumps();
    let layout = Layout {
        dim: problem.dim(),
        marks: if has_marks { problem.n_marks() } else { 0 },
        cells: grid.steps() / s.cell_factor,
        factor: s.cell_factor,
    };
    let relative = matches!(query.event, Event::SupNorm { relative_to_limit: true, .. });
    let (solver, reference) = match query.regime {
        Regime::Ldp => {
            let mut sk = LdpSkeleton::new(problem, limit)?;
            sk.half = query.half;
            let r = relative.then(|| sk.limit().clone());
            (Solver::Ldp(sk), r)
        }
        Regime::Mdp => (Solver::Mdp(MdpSkeleton::new(problem, limit, query.constraint)?), None),
    };
    let obj = Objective {
        solver,
        event: &query.event,
        layout,
        grid,
        regime: query.regime,
        model: if has_marks { problem.jumps.as_ref() } else { None },
        half: query.half,
        reference,
    };

    let n = layout.len();
    let starts: Vec<Vec<T>> = (0..=s.restarts)
        .map(|i| {
            if i == 0 {
                return vec![T::zero(); n];
            }
            let mut r = rng::stream(s.seed, rng::TAG_START, &[i as u64]);
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    T::lit(0.5 * z)
                })
                .collect()
        })
        .collect();

    let null_pair = layout.expand(grid, &starts[0], query.regime);
    let reachable = feasibility_scan(&obj, s, &starts)?;
    if reachable > s.residual_tol {
        return Ok(RateResult {
            value: T::infinity(),
            control: null_pair,
            residual: reachable,
            feasible: false,
            diagnostics: Diagnostics {
                evaluations: 0,
                iterations: 0,
                starts: 0,
                converged: false,
                trace: Vec::new(),
                winning_start: 0,
            },
        });
    }

    let outcomes: Vec<Result<StartResult<T>>> = starts
        .par_iter()
        .map(|x0| run_start(&obj, x0.clone(), s))
        .collect();
    let outcomes: Vec<StartResult<T>> = outcomes.into_iter().collect::<Result<_>>()?;

    let trace: Vec<T> = outcomes
        .iter()
        .map(|o| if o.residual <= s.residual_tol { o.cost } else { T::infinity() })
        .collect();
    let winner = (0..outcomes.len())
        .filter(|&i| trace[i].is_finite())
        .min_by(|&a, &b| trace[a].partial_cmp(&trace[b]).expect("finite").then(a.cmp(&b)))
        .or_else(|| {
            (0..outcomes.len()).min_by(|&a, &b| {
                outcomes[a]
                    .residual
                    .partial_cmp(&outcomes[b].residual)
                    .expect("finite residual")
                    .then(a.cmp(&b))
            })
        })
        .expect("at least one start");
    let best = &outcomes[winner];
    let feasible = best.residual <= s.residual_tol;
    Ok(RateResult {
        value: if feasible { best.cost } else { T::infinity() },
        control: layout.expand(grid, &best.x, query.regime),
        residual: best.residual,
        feasible,
        diagnostics: Diagnostics {
            evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
            iterations: outcomes.iter().map(|o| o.iterations).sum(),
            starts: outcomes.len(),
            converged: feasible && best.converged,
            trace,
            winning_start: winner,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqSolution<T> {
    /// `½ vᵀ G⁻¹ v`
    pub value: T,
    pub control: ControlPair<T>,
    pub gramian: Matrix<T>,
}

/// Minimum-energy control steering the unconstrained MDP skeleton from `0` to `V_T = target`,
/// over controls that are constant on cells of `cell_factor` steps.
///
/// With `B_k = [σ_k | G_{k,m} √w_m]` and `Φ(N, j) = Π_{i=j}^{N-1} (I + ∇b_i Δt)`, cell `c`
/// contributes `M_c = Σ_{k∈c} Φ(N, k+1) B_k Δt` and the Gramian is `Σ_c M_c M_cᵀ / h`.
pub fn lq_oracle<T: Scalar>(skel: &MdpSkeleton<T>, target: &[T], cell_factor: usize) -> Result<LqSolution<T>> {
    let d = skel.dim();
    check_dim(d, target.len())?;
    if skel.is_constrained() {
        return Err(Error::invalid("the LQ oracle needs the interior (unconstrained) skeleton"));
    }
    let grid = *skel.grid();
    let steps = grid.steps();
    if cell_factor == 0 || !steps.is_multiple_of(cell_factor) {
        return Err(Error::GridMismatch(format!(
            "control cell factor {cell_factor} does not divide {steps} steps"
        )));
    }
    let dt = grid.dt();
    let h = dt * T::from_usize_lossy(cell_factor);
    let marks = skel.n_marks();
    let width = d + marks;
    let sqrt_w: Vec<T> = skel.weights().iter().map(|w| w.sqrt()).collect();
    let cells = steps / cell_factor;

    let mut m_cells = vec![Matrix::zeros(d, width); cells];
    let mut phi_tail = Matrix::identity(d);
    for k in (0..steps).rev() {
        let mut b = Matrix::zeros(d, width);
        for i in 0..d {
            for j in 0..d {
                b[(i, j)] = skel.sigma(k)[(i, j)];
            }
            for m in 0..marks {
                b[(i, d + m)] = skel.jump_row(k, m)[i] * sqrt_w[m];
            }
        }
        let mut contrib = phi_tail.mul(&b);
        contrib.scale_mut(dt);
        m_cells[k / cell_factor].add_assign_scaled(T::one(), &contrib);
        let mut step = Matrix::identity(d);
        step.add_assign_scaled(dt, skel.grad(k));
        phi_tail = phi_tail.mul(&step);
    }

    let mut gram = Matrix::zeros(d, d);
    for mc in &m_cells {
        let mut g = mc.mul(&mc.transpose());
        g.scale_mut(T::one() / h);
        gram.add_assign_scaled(T::one(), &g);
    }
    let null = ControlPair::null_mdp(grid, d, marks);
    if target.iter().all(|&v| v == T::zero()) {
        return Ok(LqSolution {
            value: T::zero(),
            control: null,
            gramian: gram,
        });
    }
    let lam = gram.solve(target, T::lit(1e-12)).ok_or(Error::SingularGramian)?;
    let value = T::lit(0.5) * linalg::dot(target, &lam);

    let mut phi = Vec::with_capacity(steps * d);
    let mut psi = Vec::with_capacity(steps * marks);
    for k in 0..steps {
        let u = m_cells[k / cell_factor].transpose().mul_vec(&lam);
        phi.extend(u[..d].iter().map(|&v| v / h));
        psi.extend((0..marks).map(|m| u[d + m] / h / sqrt_w[m]));
    }
    Ok(LqSolution {
        value,
        control: ControlPair {
            phi: BrownianControl::new(grid, d, phi)?,
            psi: (marks > 0).then(|| ControlField::new(grid, marks, psi)).transpose()?,
        },
        gramian: gram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{
        ConcaveModulus, DiffusionKernel, DriftKernel, JumpKernel, KernelCoefficients, PerturbationFamily,
    };
    use crate::dynamics::solve_limit;
    use crate::geometry::ConvexDomain;
    use crate::jumps::Bounds;

    fn scalar_problem(a: f64, sigma: f64, jumps: Option<JumpModel<f64>>) -> Problem<f64> {
        let drift = DriftKernel::Affine {
            x_coef: Matrix::scaled_identity(1, a),
            y_coef: Matrix::zeros(1, 1),
            offset: vec![0.0],
        };
        let diffusion = if sigma == 0.0 {
            DiffusionKernel::Zero
        } else {
            DiffusionKernel::Constant(Matrix::scaled_identity(1, sigma))
        };
        let jump = if jumps.is_some() {
            JumpKernel::Linear { c0: vec![1.0], c1: 0.0, c2: 0.0 }
        } else {
            JumpKernel::Zero
        };
        let coeffs = KernelCoefficients::new(1, drift, diffusion, jump, 1.0, ConcaveModulus::Linear(1.0)).unwrap();
        Problem::new(
            coeffs,
            PerturbationFamily::none(),
            ConvexDomain::whole_space(1).unwrap(),
            jumps,
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn control_cost_examples() {
        let grid = TimeGrid::<f64>::new(1.0, 10).unwrap();
        let model = JumpModel::finite(vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 1.0], Bounds::from_gamma(&[1.0, 1.0]))
            .unwrap();
        let null = ControlPair::null_ldp(grid, 1, 2);
        assert_eq!(control_cost(&null, Regime::Ldp, Some(&model), false).unwrap(), 0.0);
        let mdp_null = ControlPair::null_mdp(grid, 1, 2);
        assert_eq!(control_cost(&mdp_null, Regime::Mdp, Some(&model), false).unwrap(), 0.0);
        let u = ControlPair {
            phi: BrownianControl::constant(grid, &[1.0]),
            psi: Some(ControlField::constant(grid, 2, 1.0)),
        };
        assert!((control_cost(&u, Regime::Ldp, Some(&model), false).unwrap() - 0.5).abs() < 1e-12);
        let v = ControlPair {
            phi: BrownianControl::zero(grid, 1),
            psi: Some(ControlField::constant(grid, 2, 1.0)),
        };
        assert!((control_cost(&v, Regime::Mdp, Some(&model), false).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_closed_forms() {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let p = scalar_problem(0.0, 1.0, None);
        let lim = solve_limit(&p, grid).unwrap();
        let sk = MdpSkeleton::new(&p, &lim, MdpConstraint::Interior).unwrap();
        let sol = lq_oracle(&sk, &[1.0], 1).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!(sol.control.phi.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let zero = lq_oracle(&sk, &[0.0], 1).unwrap();
        assert_eq!(zero.value, 0.0);

        let a = 0.7;
        let p = scalar_problem(a, 1.0, None);
        let mut prev = f64::INFINITY;
        for steps in [400, 800, 1600] {
            let grid = TimeGrid::new(1.0, steps).unwrap();
            let lim = solve_limit(&p, grid).unwrap();
            let sk = MdpSkeleton::new(&p, &lim, MdpConstraint::Interior).unwrap();
            let sol = lq_oracle(&sk, &[1.0], 1).unwrap();
            let exact = a / ((2.0 * a).exp() - 1.0);
            let err = (sol.value - exact).abs();
            assert!(err < prev);
            assert!(err < 5e-3);
            prev = err;
            // the optimal control reaches the target through the skeleton
            let v = sk.terminal(&sol.control).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-10);
        }

        let p = scalar_problem(0.0, 0.0, None);
        let lim = solve_limit(&p, grid).unwrap();
        let sk = MdpSkeleton::new(&p, &lim, MdpConstraint::Interior).unwrap();
        assert!(matches!(lq_oracle(&sk, &[1.0], 1), Err(Error::SingularGramian)));
    }

    fn quick_settings() -> OptimizerSettings<f64> {
        OptimizerSettings {
            cell_factor: 5,
            restarts: 1,
            ..OptimizerSettings::default()
        }
    }

    #[test]
    fn brownian_terminal_rate() {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let p = scalar_problem(0.0, 1.0, None);
        let lim = solve_limit(&p, grid).unwrap();
        let q = RateQuery {
            regime: Regime::Ldp,
            event: Event::TerminalHalfspace { normal: vec![1.0], level: 1.0 },
            settings: quick_settings(),
            half: false,
            constraint: MdpConstraint::Interior,
        };
        let r = minimize_rate(&q, &p, &lim).unwrap();
        assert!(r.feasible);
        assert!((r.value - 0.5).abs() < 1e-3, "{}", r.value);

        let at_limit = RateQuery {
            event: Event::TerminalHalfspace { normal: vec![1.0], level: 0.0 },
            ..q.clone()
        };
        let r0 = minimize_rate(&at_limit, &p, &lim).unwrap();
        assert_eq!(r0.value, 0.0);
    }

    #[test]
    fn unreachable_event_is_reported() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let p = scalar_problem(0.0, 0.0, None);
        let lim = solve_limit(&p, grid).unwrap();
        let q = RateQuery {
            regime: Regime::Ldp,
            event: Event::TerminalPoint(vec![1.0]),
            settings: OptimizerSettings {
                iterations: 50,
                ..quick_settings()
            },
            half: false,
            constraint: MdpConstraint::Interior,
        };
        let r = minimize_rate(&q, &p, &lim).unwrap();
        assert!(!r.feasible);
        assert!(r.value.is_infinite());
    }

    #[test]
    fn jump_only_steering() {
        // σ = 0, one mark of mass m and amplitude γ: reaching Y_T = v needs
        // (ψ - 1) γ m T = v, so the cost is ℓ(1 + v / (γ m T)) m T.
        let (mass, gamma, v) = (2.0, 0.5, 0.4);
        let model = JumpModel::finite(vec![1.0], vec![mass], vec![gamma], Bounds::from_gamma(&[gamma])).unwrap();
        let p = scalar_problem(0.0, 0.0, Some(model));
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let lim = solve_limit(&p, grid).unwrap();
        let q = RateQuery {
            regime: Regime::Ldp,
            event: Event::TerminalPoint(vec![v]),
            settings: OptimizerSettings {
                cell_factor: 10,
                ..quick_settings()
            },
            half: false,
            constraint: MdpConstraint::Interior,
        };
        let r = minimize_rate(&q, &p, &lim).unwrap();
        let psi = 1.0 + v / (gamma * mass);
        let exact = crate::jumps::ell(psi).unwrap() * mass;
        assert!((r.value - exact).abs() < 1e-3, "{} vs {exact}", r.value);
    }
}
