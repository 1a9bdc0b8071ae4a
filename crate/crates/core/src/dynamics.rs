//! Projected Euler-Maruyama solvers for the limit equation, the interacting particle system and
//! the controlled equation, plus the moderate-deviation rescaling.
//!
//! One step from `x` with law `μ` builds
//!
//! ```text
//! X̂ = x + b_ε(x,μ)Δt + √ε σ_ε(x,μ)ΔW + σ_ε(x,μ)φΔt
//!       + ε Σ_events G_ε(x,μ,z) - Δt ∫G_ε ψ ν(dz) + Δt ∫G_ε (ψ-1) ν(dz)
//! ```
//!
//! and sets `X' = Π_K(X̂)`, `ΔK = X̂ - X'`. Without a control `φ = 0` and `ψ = 1`, which makes
//! the last term vanish exactly. At `ε = 0` the jump sum and its compensator are dropped, which
//! leaves the skeleton dynamics.

use std::io::{self, Write};

use rand_distr::{Distribution, StandardNormal};

use crate::coefficients::{
    mean_diffusion_into, mean_drift_into, mean_jump_factor_into, EmpiricalMeasure, KernelCoefficients,
    PerturbationFamily,
};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexDomain, MEMBERSHIP_RTOL};
use crate::grid::{Path, TimeGrid};
use crate::jumps::{sample_controlled_prm, sample_prm, ControlField, JumpLog, JumpModel};
use crate::linalg::Matrix;
use crate::rng::{self, StreamRng};
use crate::scalar::Scalar;
use crate::skeleton::{BrownianControl, ControlPair};

/// Everything that defines the equation: coefficients, perturbations, constraint set, jumps and
/// the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T> {
    pub coeffs: KernelCoefficients<T>,
    pub family: PerturbationFamily<T>,
    pub domain: ConvexDomain<T>,
    pub jumps: Option<JumpModel<T>>,
    pub x0: Vec<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        coeffs: KernelCoefficients<T>,
        family: PerturbationFamily<T>,
        domain: ConvexDomain<T>,
        jumps: Option<JumpModel<T>>,
        x0: Vec<T>,
    ) -> Result<Self> {
        let d = coeffs.dim();
        check_dim(d, domain.dim())?;
        check_dim(d, x0.len())?;
        family.validate(d)?;
        if !domain.contains_within(&x0, T::lit(MEMBERSHIP_RTOL)) {
            return Err(Error::OutsideDomain("initial condition is not in the domain".into()));
        }
        Ok(Problem {
            coeffs,
            family,
            domain,
            jumps,
            x0,
        })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn n_marks(&self) -> usize {
        self.jumps.as_ref().map_or(0, JumpModel::n_marks)
    }

    /// True when a jump model is present and the jump kernel is nonzero.
    pub fn has_jumps(&self) -> bool {
        self.jumps.is_some() && !self.coeffs.jump.is_zero()
    }
}

/// `λ(ε) = ε^θ` with `θ ∈ (0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModerateScale<T> {
    theta: T,
}

impl<T: Scalar> ModerateScale<T> {
    pub fn new(theta: T) -> Result<Self> {
        if !(theta > T::zero() && theta < T::lit(0.5)) {
            return Err(Error::invalid(format!("theta must lie in (0, 1/2), got {theta}")));
        }
        Ok(ModerateScale { theta })
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn lambda(&self, eps: T) -> T {
        eps.powf(self.theta)
    }

    /// Deviation speed `ε / λ²(ε) = ε^{1-2θ}`.
    pub fn speed(&self, eps: T) -> T {
        eps.powf(T::one() - self.theta - self.theta)
    }
}

/// Simulated trajectories with their correction processes and jump logs.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle<T> {
    pub grid: TimeGrid<T>,
    pub states: Vec<Path<T>>,
    pub corrections: Vec<Path<T>>,
    pub jump_logs: Vec<JumpLog<T>>,
    pub epsilon: T,
    pub seed: u64,
    pub scheme: &'static str,
    /// Steps in which a particle's pre-projection state left the domain on a step with jumps.
    pub jump_exits: usize,
}

pub const SCHEME: &str = "projected-euler-maruyama";

impl<T: Scalar> PathBundle<T> {
    pub fn n_particles(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Empirical measure of the particles at node `k`.
    pub fn law(&self, k: usize) -> EmpiricalMeasure<T> {
        let mut flat = Vec::with_capacity(self.n_particles() * self.dim());
        for p in &self.states {
            flat.extend_from_slice(p.point(k));
        }
        EmpiricalMeasure::new(self.dim(), flat).expect("bundle has particles")
    }

    pub fn laws(&self) -> Vec<EmpiricalMeasure<T>> {
        (0..=self.grid.steps()).map(|k| self.law(k)).collect()
    }

    pub fn terminal(&self) -> Vec<Vec<T>> {
        self.states.iter().map(|p| p.last().to_vec()).collect()
    }

    pub fn max_state_norm(&self) -> T {
        self.states.iter().fold(T::zero(), |m, p| m.max(p.sup_norm()))
    }

    /// `replica,particle,t,x_1..x_d,k_1..k_d` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, replica: usize, header: bool) -> io::Result<()> {
        let d = self.dim();
        if header {
            writeln!(w, "{}", bundle_header(d))?;
        }
        for (i, (x, k)) in self.states.iter().zip(&self.corrections).enumerate() {
            for n in 0..x.len() {
                write!(w, "{replica},{i},{}", self.grid.time(n))?;
                for v in x.point(n).iter().chain(k.point(n)) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

pub fn bundle_header(dim: usize) -> String {
    let mut h = String::from("replica,particle,t");
    for i in 1..=dim {
        h.push_str(&format!(",x_{i}"));
    }
    for i in 1..=dim {
        h.push_str(&format!(",k_{i}"));
    }
    h
}

/// Where the measure argument of the coefficients comes from.
#[derive(Clone, Copy)]
pub(crate) enum LawSource<'a, T> {
    /// Empirical measure of the cloud at the start of each step.
    Interacting,
    /// A precomputed law per grid node.
    Frozen(&'a [EmpiricalMeasure<T>]),
}

/// Noise levels and perturbation sizes at one `ε`.
#[derive(Debug, Clone, Copy)]
struct Scales<T> {
    eps: T,
    sqrt_eps: T,
    rho_b: T,
    rho_sigma: T,
    rho_g: T,
}

impl<T: Scalar> Scales<T> {
    fn new(family: &PerturbationFamily<T>, eps: T) -> Self {
        if eps == T::zero() {
            return Scales {
                eps,
                sqrt_eps: T::zero(),
                rho_b: T::zero(),
                rho_sigma: T::zero(),
                rho_g: T::zero(),
            };
        }
        Scales {
            eps,
            sqrt_eps: eps.sqrt(),
            rho_b: family.rho_b.eval(eps),
            rho_sigma: family.rho_sigma.eval(eps),
            rho_g: family.rho_g.eval(eps),
        }
    }
}

/// Per-step mark integrals `∫γψ dν`, `∫γ(ψ-1) dν` and the same with `L₃`.
#[derive(Debug, Clone, Copy, Default)]
struct MarkIntegrals<T> {
    gamma_psi: T,
    gamma_psi_minus_one: T,
    l3_psi: T,
    l3_psi_minus_one: T,
}

fn mark_integrals<T: Scalar>(model: &JumpModel<T>, psi: Option<&[T]>) -> MarkIntegrals<T> {
    let mut out = MarkIntegrals::default();
    for m in 0..model.n_marks() {
        let p = psi.map_or(T::one(), |c| c[m]);
        let w = model.weights()[m];
        let wp = w * p;
        let wq = w * (p - T::one());
        out.gamma_psi += wp * model.gamma()[m];
        out.gamma_psi_minus_one += wq * model.gamma()[m];
        out.l3_psi += wp * model.l3()[m];
        out.l3_psi_minus_one += wq * model.l3()[m];
    }
    out
}

/// Shared time stepper.
pub(crate) struct Stepper<'a, T> {
    problem: &'a Problem<T>,
    grid: TimeGrid<T>,
    scales: Scales<T>,
    phi: Option<&'a BrownianControl<T>>,
    marks: Vec<MarkIntegrals<T>>,
    noisy_sigma: bool,
}

/// Jump sums `Σγ(z_e)` and `ΣL₃(z_e)` over the events of one step.
#[derive(Debug, Clone, Copy, Default)]
struct StepJumps<T> {
    gamma: T,
    l3: T,
    count: usize,
}

struct Workspace<T> {
    drift: Vec<T>,
    sigma: Matrix<T>,
    factor: Vec<T>,
    incr: Vec<T>,
    dw: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(d: usize) -> Self {
        Workspace {
            drift: vec![T::zero(); d],
            sigma: Matrix::zeros(d, d),
            factor: vec![T::zero(); d],
            incr: vec![T::zero(); d],
            dw: vec![T::zero(); d],
        }
    }
}

impl<'a, T: Scalar> Stepper<'a, T> {
    pub(crate) fn new(
        problem: &'a Problem<T>,
        grid: TimeGrid<T>,
        eps: T,
        phi: Option<&'a BrownianControl<T>>,
        psi: Option<&ControlField<T>>,
    ) -> Result<Self> {
        if !(eps >= T::zero()) || eps > T::one() {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {eps}")));
        }
        if let Some(phi) = phi {
            grid.ensure_same(phi.grid())?;
            check_dim(problem.dim(), phi.dim())?;
        }
        let marks = match (&problem.jumps, psi) {
            (Some(model), Some(psi)) => {
                grid.ensure_same(psi.grid())?;
                psi.ensure_compatible(model)?;
                (0..grid.steps()).map(|k| mark_integrals(model, Some(psi.cell(k)))).collect()
            }
            (Some(model), None) => vec![mark_integrals(model, None); grid.steps()],
            (None, Some(psi)) if psi.n_marks() > 0 => {
                return Err(Error::GridMismatch("jump control supplied without a jump model".into()))
            }
            (None, _) => Vec::new(),
        };
        let scales = Scales::new(&problem.family, eps);
        let noisy_sigma = !problem.coeffs.diffusion.is_zero() || scales.rho_sigma != T::zero();
        Ok(Stepper {
            problem,
            grid,
            scales,
            phi,
            marks,
            noisy_sigma,
        })
    }

    /// Overwrites `ws.incr` with `X̂ - x` for one step.
    fn increment(
        &self,
        k: usize,
        x: &[T],
        law: &EmpiricalMeasure<T>,
        rng: Option<&mut StreamRng>,
        jumps: StepJumps<T>,
        ws: &mut Workspace<T>,
    ) {
        let p = self.problem;
        let dt = self.grid.dt();
        let s = self.scales;
        let d = x.len();

        mean_drift_into(&p.coeffs, x, law, &mut ws.drift);
        if s.rho_b != T::zero() {
            p.family.h_b.add_scaled(s.rho_b, x, &mut ws.drift);
        }
        for i in 0..d {
            ws.incr[i] = ws.drift[i] * dt;
        }

        let need_sigma = self.noisy_sigma && (s.eps > T::zero() || self.phi.is_some());
        if need_sigma {
            mean_diffusion_into(&p.coeffs, x, law, &mut ws.sigma);
            if s.rho_sigma != T::zero() {
                ws.factor.iter_mut().for_each(|v| *v = T::zero());
                p.family.h_sigma.add_scaled(s.rho_sigma, x, &mut ws.factor);
                for i in 0..d {
                    ws.sigma[(i, i)] += ws.factor[i];
                }
            }
        }
        if let Some(rng) = rng {
            let sq = dt.sqrt();
            for v in ws.dw.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = sq * T::lit(z);
            }
            if need_sigma {
                for i in 0..d {
                    ws.incr[i] += s.sqrt_eps * crate::linalg::dot(ws.sigma.row(i), &ws.dw);
                }
            }
        }
        if let Some(phi) = self.phi {
            if need_sigma {
                let c = phi.get(k);
                for i in 0..d {
                    ws.incr[i] += crate::linalg::dot(ws.sigma.row(i), c) * dt;
                }
            }
        }

        if self.marks.is_empty() || p.coeffs.jump.is_zero() && s.rho_g == T::zero() {
            return;
        }
        let mi = self.marks[k];
        let eps_part = |sum: T, comp: T| {
            if s.eps > T::zero() {
                s.eps * sum - dt * comp
            } else {
                T::zero()
            }
        };
        if !p.coeffs.jump.is_zero() {
            let c = eps_part(jumps.gamma, mi.gamma_psi) + dt * mi.gamma_psi_minus_one;
            mean_jump_factor_into(&p.coeffs, x, law, &mut ws.factor);
            for i in 0..d {
                ws.incr[i] += c * ws.factor[i];
            }
        }
        if s.rho_g != T::zero() {
            let c = s.rho_g * (eps_part(jumps.l3, mi.l3_psi) + dt * mi.l3_psi_minus_one);
            ws.factor.iter_mut().for_each(|v| *v = T::zero());
            p.family.h_g.add_scaled(c, x, &mut ws.factor);
            for i in 0..d {
                ws.incr[i] += ws.factor[i];
            }
        }
    }
}

/// Per-particle noise: Brownian stream and the step-bucketed jump log.
struct Noise<T> {
    rng: Option<StreamRng>,
    log: JumpLog<T>,
    cursor: usize,
}

impl<T: Scalar> Noise<T> {
    fn step_jumps(&mut self, model: Option<&JumpModel<T>>, grid: &TimeGrid<T>, k: usize) -> StepJumps<T> {
        let mut out = StepJumps::default();
        let Some(model) = model else { return out };
        while self.cursor < self.log.events.len() {
            let e = self.log.events[self.cursor];
            if grid.step_containing(e.time) != k {
                break;
            }
            out.gamma += model.gamma()[e.mark_index];
            out.l3 += model.l3()[e.mark_index];
            out.count += 1;
            self.cursor += 1;
        }
        out
    }
}

/// Inputs of one cloud run beyond the problem itself.
pub(crate) struct RunSpec<'a, T> {
    pub grid: TimeGrid<T>,
    pub eps: T,
    pub seed: u64,
    pub n: usize,
    pub law: LawSource<'a, T>,
    pub phi: Option<&'a BrownianControl<T>>,
    pub psi: Option<&'a ControlField<T>>,
}

pub(crate) fn run_cloud<T: Scalar>(problem: &Problem<T>, spec: RunSpec<'_, T>) -> Result<PathBundle<T>> {
    if spec.n == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    if let LawSource::Frozen(laws) = spec.law {
        if laws.len() != spec.grid.steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "companion law has {} nodes, grid has {}",
                laws.len(),
                spec.grid.steps() + 1
            )));
        }
        for l in laws {
            check_dim(problem.dim(), l.dim())?;
        }
    }
    let stepper = Stepper::new(problem, spec.grid, spec.eps, spec.phi, spec.psi)?;
    let d = problem.dim();
    let steps = spec.grid.steps();
    let t_end = spec.grid.t_end();
    let noisy = spec.eps > T::zero();
    let jump_model = if problem.has_jumps() || stepper.scales.rho_g != T::zero() {
        problem.jumps.as_ref()
    } else {
        None
    };

    let mut noise = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let idx = [i as u64];
        let rng = noisy.then(|| rng::stream(spec.seed, rng::TAG_BROWNIAN, &idx));
        let log = match (noisy, jump_model) {
            (true, Some(model)) => {
                let jseed = rng::derive_seed(spec.seed, rng::TAG_JUMPS, &idx);
                match spec.psi {
                    Some(psi) => sample_controlled_prm(model, psi, spec.eps, jseed)?,
                    None => sample_prm(model, t_end, spec.eps, jseed)?,
                }
            }
            _ => JumpLog::default(),
        };
        noise.push(Noise { rng, log, cursor: 0 });
    }

    let mut cloud: Vec<T> = (0..spec.n).flat_map(|_| problem.x0.iter().copied()).collect();
    let mut kcum = vec![T::zero(); spec.n * d];
    let mut states: Vec<Path<T>> = (0..spec.n).map(|_| Path::with_capacity(d, steps + 1)).collect();
    let mut corrections: Vec<Path<T>> = (0..spec.n).map(|_| Path::with_capacity(d, steps + 1)).collect();
    for i in 0..spec.n {
        states[i].push(&problem.x0);
        corrections[i].push(&kcum[i * d..(i + 1) * d]);
    }
    let mut ws = Workspace::new(d);
    let mut next = cloud.clone();
    let mut jump_exits = 0;
    let tol = T::lit(MEMBERSHIP_RTOL);

    for k in 0..steps {
        let own;
        let law = match spec.law {
            LawSource::Interacting => {
                own = EmpiricalMeasure::new(d, cloud.clone())?;
                &own
            }
            LawSource::Frozen(laws) => &laws[k],
        };
        for i in 0..spec.n {
            let x = &cloud[i * d..(i + 1) * d];
            let nz = &mut noise[i];
            let jumps = nz.step_jumps(jump_model, &spec.grid, k);
            stepper.increment(k, x, law, nz.rng.as_mut(), jumps, &mut ws);
            let out = &mut next[i * d..(i + 1) * d];
            for j in 0..d {
                out[j] = x[j] + ws.incr[j];
            }
            if jumps.count > 0 && !problem.domain.contains_within(out, tol) {
                jump_exits += 1;
            }
            let hat = out.to_vec();
            problem.domain.project_in_place(out)?;
            if !problem.domain.contains_within(out, tol) {
                return Err(Error::Numerical(format!("projection left the domain at step {k}")));
            }
            let kc = &mut kcum[i * d..(i + 1) * d];
            for j in 0..d {
                kc[j] += hat[j] - out[j];
            }
            states[i].push(out);
            corrections[i].push(kc);
        }
        std::mem::swap(&mut cloud, &mut next);
    }

    Ok(PathBundle {
        grid: spec.grid,
        states,
        corrections,
        jump_logs: noise.into_iter().map(|n| n.log).collect(),
        epsilon: spec.eps,
        seed: spec.seed,
        scheme: SCHEME,
        jump_exits,
    })
}

/// Deterministic limit `(X⁰, K⁰)`, whose law is `δ_{X⁰_t}`.
pub fn solve_limit<T: Scalar>(problem: &Problem<T>, grid: TimeGrid<T>) -> Result<PathBundle<T>> {
    run_cloud(
        problem,
        RunSpec {
            grid,
            eps: T::zero(),
            seed: 0,
            n: 1,
            law: LawSource::Interacting,
            phi: None,
            psi: None,
        },
    )
}

/// `N`-particle approximation of the small-noise equation at noise level `ε ∈ [0, 1]`.
pub fn simulate_particles<T: Scalar>(
    problem: &Problem<T>,
    grid: TimeGrid<T>,
    eps: T,
    n_particles: usize,
    seed: u64,
) -> Result<PathBundle<T>> {
    run_cloud(
        problem,
        RunSpec {
            grid,
            eps,
            seed,
            n: n_particles,
            law: LawSource::Interacting,
            phi: None,
            psi: None,
        },
    )
}

/// Controlled paths `Z^{ε,u}` driven by the law of a companion uncontrolled run.
///
/// Path `i` reuses the Brownian and Poisson streams of particle `i` of a
/// [`simulate_particles`] run with the same seed, so the null control reproduces that run
/// bit for bit.
pub fn simulate_controlled<T: Scalar>(
    problem: &Problem<T>,
    companion_law: &[EmpiricalMeasure<T>],
    u: &ControlPair<T>,
    eps: T,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle<T>> {
    let grid = *u.phi.grid();
    if let Some(psi) = &u.psi {
        psi.ensure_nonnegative()?;
    }
    run_cloud(
        problem,
        RunSpec {
            grid,
            eps,
            seed,
            n: n_paths,
            law: LawSource::Frozen(companion_law),
            phi: Some(&u.phi),
            psi: u.psi.as_ref(),
        },
    )
}

/// `M^ε = (X^ε - X⁰) / λ(ε)` for every particle.
pub fn moderate_rescale<T: Scalar>(
    bundle_eps: &PathBundle<T>,
    bundle_limit: &PathBundle<T>,
    scale: &ModerateScale<T>,
) -> Result<Vec<Path<T>>> {
    bundle_eps.grid.ensure_same(&bundle_limit.grid)?;
    let limit = &bundle_limit.states[0];
    check_dim(limit.dim(), bundle_eps.dim())?;
    let inv = T::one() / scale.lambda(bundle_eps.epsilon);
    Ok(bundle_eps
        .states
        .iter()
        .map(|p| {
            p.map_points(|k, x| {
                x.iter()
                    .zip(limit.point(k))
                    .map(|(&a, &b)| (a - b) * inv)
                    .collect()
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{ConcaveModulus, DiffusionKernel, DriftKernel, JumpKernel};

    fn problem(drift: DriftKernel<f64>, sigma: f64, domain: ConvexDomain<f64>, x0: f64) -> Problem<f64> {
        let diffusion = if sigma == 0.0 {
            DiffusionKernel::Zero
        } else {
            DiffusionKernel::Constant(Matrix::scaled_identity(1, sigma))
        };
        let coeffs = KernelCoefficients::new(
            1,
            drift,
            diffusion,
            JumpKernel::Zero,
            1.0,
            ConcaveModulus::Linear(1.0),
        )
        .unwrap();
        Problem::new(coeffs, PerturbationFamily::none(), domain, None, vec![x0]).unwrap()
    }

    fn minus_x() -> DriftKernel<f64> {
        DriftKernel::Affine {
            x_coef: Matrix::scaled_identity(1, -1.0),
            y_coef: Matrix::zeros(1, 1),
            offset: vec![0.0],
        }
    }

    #[test]
    fn limit_examples() {
        let ws = ConvexDomain::whole_space(1).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let zero = solve_limit(&problem(DriftKernel::Zero, 0.0, ws.clone(), 0.3), grid).unwrap();
        assert!(zero.states[0].points().all(|p| p == [0.3]));
        assert!(zero.corrections[0].points().all(|p| p == [0.0]));

        let mut err = Vec::new();
        for steps in [100, 200] {
            let g = TimeGrid::new(1.0, steps).unwrap();
            let b = solve_limit(&problem(minus_x(), 0.0, ws.clone(), 1.0), g).unwrap();
            err.push((b.states[0].last()[0] - (-1f64).exp()).abs());
        }
        assert!(err[0] < 1e-2 && err[1] < err[0] * 0.6);

        let half_line = ConvexDomain::boxed(vec![0.0], vec![f64::INFINITY]).unwrap();
        let b = solve_limit(&problem(DriftKernel::Constant(vec![-1.0]), 0.0, half_line, 0.5), grid).unwrap();
        for k in 0..=100 {
            let t = grid.time(k);
            let x = b.states[0].point(k)[0];
            let kk = b.corrections[0].point(k)[0];
            assert!((x - (0.5 - t).max(0.0)).abs() < 1e-12, "t={t} x={x}");
            assert!((kk - (0.5 - t).min(0.0)).abs() < 1e-12, "t={t} k={kk}");
        }
    }

    #[test]
    fn zero_noise_particles_match_limit() {
        let ws = ConvexDomain::whole_space(1).unwrap();
        let p = problem(DriftKernel::MeanFieldOu { alpha: 0.4, beta: 1.0 }, 1.0, ws, 1.0);
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let lim = solve_limit(&p, grid).unwrap();
        let sim = simulate_particles(&p, grid, 0.0, 1, 5).unwrap();
        assert_eq!(lim.states, sim.states);
        assert_eq!(lim.corrections, sim.corrections);
    }

    #[test]
    fn determinism_and_containment() {
        let unit = ConvexDomain::boxed(vec![0.0], vec![1.0]).unwrap();
        let p = problem(DriftKernel::Constant(vec![3.0]), 1.0, unit.clone(), 0.5);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let a = simulate_particles(&p, grid, 0.3, 8, 42).unwrap();
        let b = simulate_particles(&p, grid, 0.3, 8, 42).unwrap();
        assert_eq!(a, b);
        for path in &a.states {
            assert!(path.points().all(|x| (0.0..=1.0).contains(&x[0])));
        }
        let c = simulate_particles(&p, grid, 0.3, 8, 43).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn moderate_rescale_identities() {
        let ws = ConvexDomain::whole_space(1).unwrap();
        let p = problem(DriftKernel::Constant(vec![0.3]), 0.0, ws, 0.0);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let lim = solve_limit(&p, grid).unwrap();
        let sim = simulate_particles(&p, grid, 0.1, 3, 1).unwrap();
        let scale = ModerateScale::new(0.25).unwrap();
        let m = moderate_rescale(&sim, &lim, &scale).unwrap();
        assert!(m.iter().all(|path| path.points().all(|x| x == [0.0])));
        assert!(ModerateScale::new(0.5).is_err());
        assert!((scale.speed(0.01) - 0.1).abs() < 1e-15);
    }
}
