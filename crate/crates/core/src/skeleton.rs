//! Deterministic controlled equations: the LDP skeleton `Y^u` and the linearised MDP skeleton
//! `V^u`, together with the control energies.

use std::io::{self, Write};

use crate::coefficients::{
    grad_b, mean_diffusion_into, mean_jump_factor_into, EmpiricalMeasure,
};
use crate::dynamics::{run_cloud, LawSource, PathBundle, Problem, RunSpec};
use crate::error::{check_dim, Error, Result};
use crate::geometry::ConvexDomain;
use crate::grid::{Path, TimeGrid};
use crate::jumps::{q2, ControlField, JumpModel};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Piecewise-constant Brownian control `φ` on the cells of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianControl<T> {
    grid: TimeGrid<T>,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> BrownianControl<T> {
    /// `values[k * dim + i]` is component `i` on cell `k`.
    pub fn new(grid: TimeGrid<T>, dim: usize, values: Vec<T>) -> Result<Self> {
        check_dim(grid.steps() * dim, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("control values must be finite"));
        }
        Ok(BrownianControl { grid, dim, values })
    }

    pub fn zero(grid: TimeGrid<T>, dim: usize) -> Self {
        BrownianControl {
            grid,
            dim,
            values: vec![T::zero(); grid.steps() * dim],
        }
    }

    pub fn constant(grid: TimeGrid<T>, c: &[T]) -> Self {
        let values = (0..grid.steps()).flat_map(|_| c.iter().copied()).collect();
        BrownianControl {
            grid,
            dim: c.len(),
            values,
        }
    }

    /// Samples `f` at the left end of every cell.
    pub fn from_fn(grid: TimeGrid<T>, dim: usize, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.steps() * dim);
        for k in 0..grid.steps() {
            let v = f(grid.time(k));
            check_dim(dim, v.len())?;
            values.extend(v);
        }
        Self::new(grid, dim, values)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, k: usize) -> &[T] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: T, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        check_dim(self.dim, other.dim)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + s * b)
            .collect();
        Self::new(self.grid, self.dim, values)
    }

    /// Writes `t,phi_1..phi_d` rows, one per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for i in 1..=self.dim {
            write!(w, ",phi_{i}")?;
        }
        writeln!(w)?;
        for k in 0..self.grid.steps() {
            write!(w, "{}", self.grid.time(k))?;
            for v in self.get(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `Q₁(φ) = ½ ∫ |φ|² ds`
pub fn q1<T: Scalar>(phi: &BrownianControl<T>) -> T {
    T::lit(0.5) * phi.grid.dt() * phi.values.iter().map(|&v| v * v).sum::<T>()
}

/// Control `u = (φ, ψ)`; `ψ` is absent for problems without jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair<T> {
    pub phi: BrownianControl<T>,
    pub psi: Option<ControlField<T>>,
}

impl<T: Scalar> ControlPair<T> {
    /// `φ = 0`, `ψ = 1`.
    pub fn null_ldp(grid: TimeGrid<T>, dim: usize, n_marks: usize) -> Self {
        ControlPair {
            phi: BrownianControl::zero(grid, dim),
            psi: (n_marks > 0).then(|| ControlField::constant(grid, n_marks, T::one())),
        }
    }

    /// `φ = 0`, `ψ = 0`.
    pub fn null_mdp(grid: TimeGrid<T>, dim: usize, n_marks: usize) -> Self {
        ControlPair {
            phi: BrownianControl::zero(grid, dim),
            psi: (n_marks > 0).then(|| ControlField::constant(grid, n_marks, T::zero())),
        }
    }

    fn check(&self, grid: &TimeGrid<T>, dim: usize, model: Option<&JumpModel<T>>) -> Result<()> {
        grid.ensure_same(self.phi.grid())?;
        check_dim(dim, self.phi.dim())?;
        match (&self.psi, model) {
            (Some(psi), Some(m)) => {
                grid.ensure_same(psi.grid())?;
                psi.ensure_compatible(m)
            }
            (Some(psi), None) if psi.n_marks() > 0 => {
                Err(Error::GridMismatch("jump control supplied without a jump model".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A skeleton path with its correction and the energy of the control that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSolution<T> {
    pub grid: TimeGrid<T>,
    pub path: Path<T>,
    pub correction: Path<T>,
    pub q1: T,
    pub q2: T,
    pub cost: T,
    /// Whether a constraint acted on the path (always true for the LDP skeleton).
    pub constrained: bool,
}

impl<T: Scalar> SkeletonSolution<T> {
    /// `t,y_1..y_d,k_1..k_d` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.path.dim();
        write!(w, "t")?;
        for i in 1..=d {
            write!(w, ",y_{i}")?;
        }
        for i in 1..=d {
            write!(w, ",k_{i}")?;
        }
        writeln!(w)?;
        for n in 0..self.path.len() {
            write!(w, "{}", self.grid.time(n))?;
            for v in self.path.point(n).iter().chain(self.correction.point(n)) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn limit_path<T: Scalar>(problem: &Problem<T>, limit: &PathBundle<T>) -> Result<Path<T>> {
    if limit.n_particles() != 1 || limit.epsilon != T::zero() {
        return Err(Error::invalid("limit bundle must be a single noiseless path"));
    }
    check_dim(problem.dim(), limit.dim())?;
    Ok(limit.states[0].clone())
}

/// LDP skeleton solver with the measure argument `δ_{X⁰_t}` cached per node.
pub struct LdpSkeleton<'a, T> {
    problem: &'a Problem<T>,
    grid: TimeGrid<T>,
    laws: Vec<EmpiricalMeasure<T>>,
    limit: Path<T>,
    /// Apply the ½ factor to `Q₂`.
    pub half: bool,
}

impl<'a, T: Scalar> LdpSkeleton<'a, T> {
    pub fn new(problem: &'a Problem<T>, limit: &PathBundle<T>) -> Result<Self> {
        let path = limit_path(problem, limit)?;
        let laws = path.points().map(EmpiricalMeasure::dirac).collect();
        Ok(LdpSkeleton {
            problem,
            grid: limit.grid,
            laws,
            limit: path,
            half: false,
        })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn limit(&self) -> &Path<T> {
        &self.limit
    }

    pub fn problem(&self) -> &Problem<T> {
        self.problem
    }

    pub fn energy(&self, u: &ControlPair<T>) -> Result<(T, T)> {
        let q2v = match (&u.psi, &self.problem.jumps) {
            (Some(psi), Some(m)) => q2(psi, m, self.half)?,
            _ => T::zero(),
        };
        Ok((q1(&u.phi), q2v))
    }

    pub fn solve(&self, u: &ControlPair<T>) -> Result<SkeletonSolution<T>> {
        u.check(&self.grid, self.problem.dim(), self.problem.jumps.as_ref())?;
        if let Some(psi) = &u.psi {
            psi.ensure_nonnegative()?;
        }
        let b = run_cloud(
            self.problem,
            RunSpec {
                grid: self.grid,
                eps: T::zero(),
                seed: 0,
                n: 1,
                law: LawSource::Frozen(&self.laws),
                phi: Some(&u.phi),
                psi: u.psi.as_ref(),
            },
        )?;
        let (q1v, q2v) = self.energy(u)?;
        let PathBundle {
            mut states,
            mut corrections,
            ..
        } = b;
        Ok(SkeletonSolution {
            grid: self.grid,
            path: states.swap_remove(0),
            correction: corrections.swap_remove(0),
            q1: q1v,
            q2: q2v,
            cost: q1v + q2v,
            constrained: true,
        })
    }
}

/// `Y^u` driven by the limit path's law, with cost `Q₁(φ) + Q₂(ψ)`.
pub fn solve_ldp_skeleton<T: Scalar>(
    problem: &Problem<T>,
    limit: &PathBundle<T>,
    u: &ControlPair<T>,
    half: bool,
) -> Result<SkeletonSolution<T>> {
    let mut s = LdpSkeleton::new(problem, limit)?;
    s.half = half;
    s.solve(u)
}

/// Constraint handling for the deviation process `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MdpConstraint {
    /// `K̂ ≡ 0`; assumes the limit path stays interior.
    #[default]
    Interior,
    /// Project `X⁰_{t} + V_t` onto `K` and record the correction.
    Projected,
}

/// MDP skeleton with `∇b`, `σ` and `G(·, z)` frozen along `X⁰`.
#[derive(Debug, Clone)]
pub struct MdpSkeleton<T> {
    grid: TimeGrid<T>,
    dim: usize,
    weights: Vec<T>,
    a: Vec<Matrix<T>>,
    sigma: Vec<Matrix<T>>,
    /// `g[k][m * dim + i]`
    g: Vec<Vec<T>>,
    limit: Path<T>,
    domain: Option<ConvexDomain<T>>,
}

impl<T: Scalar> MdpSkeleton<T> {
    pub fn new(problem: &Problem<T>, limit: &PathBundle<T>, constraint: MdpConstraint) -> Result<Self> {
        let path = limit_path(problem, limit)?;
        let d = problem.dim();
        let steps = limit.grid.steps();
        let weights = problem.jumps.as_ref().map_or(Vec::new(), |m| m.weights().to_vec());
        let mut a = Vec::with_capacity(steps);
        let mut sigma = Vec::with_capacity(steps);
        let mut g = Vec::with_capacity(steps);
        let mut factor = vec![T::zero(); d];
        for k in 0..steps {
            let x = path.point(k);
            let law = EmpiricalMeasure::dirac(x);
            a.push(grad_b(&problem.coeffs, x, &law)?);
            let mut s = Matrix::zeros(d, d);
            mean_diffusion_into(&problem.coeffs, x, &law, &mut s);
            sigma.push(s);
            let mut gk = Vec::with_capacity(weights.len() * d);
            if let Some(model) = &problem.jumps {
                mean_jump_factor_into(&problem.coeffs, x, &law, &mut factor);
                for &gamma in model.gamma() {
                    gk.extend(factor.iter().map(|&f| gamma * f));
                }
            }
            g.push(gk);
        }
        let domain = match constraint {
            MdpConstraint::Interior => None,
            MdpConstraint::Projected => Some(problem.domain.clone()),
        };
        Ok(MdpSkeleton {
            grid: limit.grid,
            dim: d,
            weights,
            a,
            sigma,
            g,
            limit: path,
            domain,
        })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_marks(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `∇b(X⁰_{t_k}, δ_{X⁰_{t_k}})`
    pub fn grad(&self, k: usize) -> &Matrix<T> {
        &self.a[k]
    }

    pub fn sigma(&self, k: usize) -> &Matrix<T> {
        &self.sigma[k]
    }

    /// `G(X⁰_{t_k}, δ_{X⁰_{t_k}}, z_m)`
    pub fn jump_row(&self, k: usize, m: usize) -> &[T] {
        &self.g[k][m * self.dim..(m + 1) * self.dim]
    }

    pub fn is_constrained(&self) -> bool {
        self.domain.is_some()
    }

    /// `½∫|φ|² + ½∫∫|ψ|² ν ds`
    pub fn energy(&self, u: &ControlPair<T>) -> (T, T) {
        let half = T::lit(0.5);
        let q2v = u.psi.as_ref().map_or(T::zero(), |psi| {
            let dt = psi.grid().dt();
            (0..psi.grid().steps())
                .map(|k| {
                    psi.cell(k)
                        .iter()
                        .zip(&self.weights)
                        .map(|(&p, &w)| p * p * w)
                        .sum::<T>()
                })
                .sum::<T>()
                * dt
                * half
        });
        (q1(&u.phi), q2v)
    }

    /// Terminal value `V_T` only, without allocating the path.
    pub fn terminal(&self, u: &ControlPair<T>) -> Result<Vec<T>> {
        let mut v = vec![T::zero(); self.dim];
        let mut scratch = vec![T::zero(); self.dim];
        self.check(u)?;
        for k in 0..self.grid.steps() {
            self.step(k, u, &mut v, &mut scratch)?;
        }
        Ok(v)
    }

    fn check(&self, u: &ControlPair<T>) -> Result<()> {
        self.grid.ensure_same(u.phi.grid())?;
        check_dim(self.dim, u.phi.dim())?;
        match &u.psi {
            Some(psi) => {
                self.grid.ensure_same(psi.grid())?;
                check_dim(self.n_marks(), psi.n_marks())
            }
            None => Ok(()),
        }
    }

    /// Advances `v` by one step; returns nothing but leaves the pre-projection value in
    /// `scratch`.
    fn step(&self, k: usize, u: &ControlPair<T>, v: &mut [T], scratch: &mut [T]) -> Result<()> {
        let d = self.dim;
        let dt = self.grid.dt();
        let phi = u.phi.get(k);
        for i in 0..d {
            let mut r = linalg::dot(self.a[k].row(i), v) + linalg::dot(self.sigma[k].row(i), phi);
            if let Some(psi) = &u.psi {
                for (m, (&p, &w)) in psi.cell(k).iter().zip(&self.weights).enumerate() {
                    r += self.g[k][m * d + i] * p * w;
                }
            }
            scratch[i] = v[i] + r * dt;
        }
        v.copy_from_slice(scratch);
        if let Some(domain) = &self.domain {
            let x = self.limit.point(k + 1);
            let mut y: Vec<T> = x.iter().zip(v.iter()).map(|(&a, &b)| a + b).collect();
            domain.project_in_place(&mut y)?;
            for i in 0..d {
                v[i] = y[i] - x[i];
            }
        }
        Ok(())
    }

    pub fn solve(&self, u: &ControlPair<T>) -> Result<SkeletonSolution<T>> {
        self.check(u)?;
        let d = self.dim;
        let steps = self.grid.steps();
        let mut v = vec![T::zero(); d];
        let mut scratch = vec![T::zero(); d];
        let mut kc = vec![T::zero(); d];
        let mut path = Path::with_capacity(d, steps + 1);
        let mut correction = Path::with_capacity(d, steps + 1);
        path.push(&v);
        correction.push(&kc);
        for k in 0..steps {
            self.step(k, u, &mut v, &mut scratch)?;
            for i in 0..d {
                kc[i] += scratch[i] - v[i];
            }
            path.push(&v);
            correction.push(&kc);
        }
        let (q1v, q2v) = self.energy(u);
        Ok(SkeletonSolution {
            grid: self.grid,
            path,
            correction,
            q1: q1v,
            q2: q2v,
            cost: q1v + q2v,
            constrained: self.is_constrained(),
        })
    }
}

/// `V^u` from `V₀ = 0` with coefficients frozen along the limit path.
pub fn solve_mdp_skeleton<T: Scalar>(
    problem: &Problem<T>,
    limit: &PathBundle<T>,
    u: &ControlPair<T>,
    constraint: MdpConstraint,
) -> Result<SkeletonSolution<T>> {
    MdpSkeleton::new(problem, limit, constraint)?.solve(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetReport<T> {
    pub q1: T,
    pub q2: T,
    pub q2_bound: T,
    pub in_s1: bool,
    pub in_s2: bool,
}

/// Membership of `φ` in `S₁ᵐ` and of `ψ` in `S₂ᵐ`, or in `{Q₂ <= m λ²(ε)}` when `lambda` is
/// given.
pub fn level_set_check<T: Scalar>(
    u: &ControlPair<T>,
    model: Option<&JumpModel<T>>,
    m: T,
    lambda: Option<T>,
    half: bool,
) -> Result<LevelSetReport<T>> {
    let q1v = q1(&u.phi);
    let q2v = match (&u.psi, model) {
        (Some(psi), Some(model)) => q2(psi, model, half)?,
        (Some(psi), None) if psi.n_marks() > 0 => {
            return Err(Error::GridMismatch("jump control supplied without a jump model".into()))
        }
        _ => T::zero(),
    };
    let q2_bound = lambda.map_or(m, |l| m * l * l);
    Ok(LevelSetReport {
        q1: q1v,
        q2: q2v,
        q2_bound,
        in_s1: q1v <= m,
        in_s2: q2v <= q2_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{
        ConcaveModulus, DiffusionKernel, DriftKernel, JumpKernel, KernelCoefficients, PerturbationFamily,
    };
    use crate::dynamics::solve_limit;
    use crate::jumps::Bounds;

    fn problem(
        drift: DriftKernel<f64>,
        sigma: f64,
        jump: JumpKernel<f64>,
        jumps: Option<JumpModel<f64>>,
    ) -> Problem<f64> {
        let diffusion = if sigma == 0.0 {
            DiffusionKernel::Zero
        } else {
            DiffusionKernel::Constant(Matrix::scaled_identity(1, sigma))
        };
        let coeffs =
            KernelCoefficients::new(1, drift, diffusion, jump, 1.0, ConcaveModulus::Linear(1.0)).unwrap();
        Problem::new(
            coeffs,
            PerturbationFamily::none(),
            ConvexDomain::whole_space(1).unwrap(),
            jumps,
            vec![0.5],
        )
        .unwrap()
    }

    #[test]
    fn q1_examples() {
        let grid = TimeGrid::<f64>::new(1.0, 1000).unwrap();
        assert_eq!(q1(&BrownianControl::zero(grid, 2)), 0.0);
        assert!((q1(&BrownianControl::constant(grid, &[3.0])) - 4.5).abs() < 1e-12);
        let ramp = BrownianControl::from_fn(grid, 1, |t| vec![t]).unwrap();
        assert!((q1(&ramp) - 1.0 / 6.0).abs() < 1e-3);
    }

    #[test]
    fn ldp_skeleton_examples() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let p = problem(DriftKernel::Zero, 1.0, JumpKernel::Zero, None);
        let lim = solve_limit(&p, grid).unwrap();
        let null = solve_ldp_skeleton(&p, &lim, &ControlPair::null_ldp(grid, 1, 0), false).unwrap();
        assert!(null.path.points().all(|y| y == [0.5]));
        assert_eq!(null.cost, 0.0);

        let u = ControlPair {
            phi: BrownianControl::constant(grid, &[0.7]),
            psi: None,
        };
        let s = solve_ldp_skeleton(&p, &lim, &u, false).unwrap();
        for k in 0..=100 {
            assert!((s.path.point(k)[0] - (0.5 + 0.7 * grid.time(k))).abs() < 1e-12);
        }

        let gamma = vec![0.3, 0.9];
        let model = JumpModel::finite(vec![1.0, 2.0], vec![0.25, 0.75], gamma.clone(), Bounds::from_gamma(&gamma))
            .unwrap();
        let gbar = model.mean_gamma();
        let pj = problem(
            DriftKernel::Zero,
            0.0,
            JumpKernel::Linear { c0: vec![1.0], c1: 0.0, c2: 0.0 },
            Some(model),
        );
        let lim = solve_limit(&pj, grid).unwrap();
        let u = ControlPair {
            phi: BrownianControl::zero(grid, 1),
            psi: Some(ControlField::constant(grid, 2, 2.0)),
        };
        let s = solve_ldp_skeleton(&pj, &lim, &u, false).unwrap();
        assert!((s.path.last()[0] - (0.5 + gbar)).abs() < 1e-12);
        assert!((s.q2 - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn null_control_skeleton_is_the_limit() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let p = problem(DriftKernel::SineCoupling { amp: 0.5, freq: 2.0 }, 0.8, JumpKernel::Zero, None);
        let mut p = p;
        p.coeffs.drift = DriftKernel::MeanFieldOu { alpha: 0.3, beta: 0.7 };
        let lim = solve_limit(&p, grid).unwrap();
        let s = solve_ldp_skeleton(&p, &lim, &ControlPair::null_ldp(grid, 1, 0), false).unwrap();
        assert_eq!(s.path, lim.states[0]);
    }

    #[test]
    fn mdp_variation_of_constants() {
        let a = 0.8;
        let c = 1.3;
        let exact = c * ((a * 1.0f64).exp() - 1.0) / a;
        let mut errs = Vec::new();
        for steps in [200, 400] {
            let grid = TimeGrid::new(1.0, steps).unwrap();
            let drift = DriftKernel::Affine {
                x_coef: Matrix::scaled_identity(1, a),
                y_coef: Matrix::zeros(1, 1),
                offset: vec![0.0],
            };
            let p = problem(drift, 1.0, JumpKernel::Zero, None);
            let lim = solve_limit(&p, grid).unwrap();
            let u = ControlPair {
                phi: BrownianControl::constant(grid, &[c]),
                psi: None,
            };
            let s = solve_mdp_skeleton(&p, &lim, &u, MdpConstraint::Interior).unwrap();
            errs.push((s.path.last()[0] - exact).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 0.9, "order {order}");

        let grid = TimeGrid::new(1.0, 10).unwrap();
        let p = problem(DriftKernel::Zero, 1.0, JumpKernel::Zero, None);
        let lim = solve_limit(&p, grid).unwrap();
        let s = solve_mdp_skeleton(&p, &lim, &ControlPair::null_mdp(grid, 1, 0), MdpConstraint::Interior)
            .unwrap();
        assert!(s.path.points().all(|v| v == [0.0]));
    }

    #[test]
    fn level_sets() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = JumpModel::<f64>::finite(vec![0.0], vec![1.0], vec![1.0], Bounds::from_gamma(&[1.0])).unwrap();
        let null = ControlPair::null_ldp(grid, 1, 1);
        let r = level_set_check(&null, Some(&model), 0.1, None, false).unwrap();
        assert!(r.in_s1 && r.in_s2);
        let big = ControlPair {
            phi: BrownianControl::constant(grid, &[2.0]),
            psi: Some(ControlField::constant(grid, 1, 2.0)),
        };
        let r = level_set_check(&big, Some(&model), 1.0, None, false).unwrap();
        assert!(!r.in_s1);
        let r = level_set_check(&big, Some(&model), 0.4, None, false).unwrap();
        assert!(r.in_s2 && (r.q2 - 0.3863).abs() < 1e-4);
    }
}
