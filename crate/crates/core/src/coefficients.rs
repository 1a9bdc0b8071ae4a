//! Interaction kernels `b̃, σ̃, G̃` and their mean-field integrals against empirical measures.
//!
//! The measure-dependent coefficients are always first-order kernel integrals,
//! `b(x, μ) = ∫ b̃(x, y) μ(dy)`, which for an `N`-particle cloud is an average over the
//! particles. Kernels come from a fixed catalog so configurations stay portable.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Concave modulus `κ` bounding the one-sided Lipschitz behaviour of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConcaveModulus<T> {
    /// `κ(u) = L u`
    Linear(T),
    /// `κ(u) = u log(1/u)` on `[0, δ]`, continued by its tangent line beyond `δ`.
    LogCap(T),
}

impl<T: Scalar> ConcaveModulus<T> {
    pub fn linear(l: T) -> Result<Self> {
        if !(l > T::zero()) || !l.is_finite() {
            return Err(Error::invalid(format!("linear modulus needs L > 0, got {l}")));
        }
        Ok(ConcaveModulus::Linear(l))
    }

    pub fn log_cap(delta: T) -> Result<Self> {
        let e_inv = T::lit(std::f64::consts::E.recip());
        if !(delta > T::zero()) || delta > e_inv {
            return Err(Error::invalid(format!(
                "log modulus needs delta in (0, 1/e], got {delta}"
            )));
        }
        Ok(ConcaveModulus::LogCap(delta))
    }

    pub fn eval(&self, u: T) -> T {
        if u <= T::zero() {
            return T::zero();
        }
        match *self {
            ConcaveModulus::Linear(l) => l * u,
            ConcaveModulus::LogCap(delta) => {
                if u <= delta {
                    -u * u.ln()
                } else {
                    let at = -delta * delta.ln();
                    let slope = -delta.ln() - T::one();
                    at + slope * (u - delta)
                }
            }
        }
    }
}

/// Drift kernel catalog `b̃ : R^d x R^d -> R^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftKernel<T> {
    Zero,
    Constant(Vec<T>),
    /// `b̃(x, y) = -α x + β (y - x)`
    MeanFieldOu { alpha: T, beta: T },
    /// `b̃(x, y) = A x + B y + c`
    Affine {
        x_coef: Matrix<T>,
        y_coef: Matrix<T>,
        offset: Vec<T>,
    },
    /// `b̃(x, y)_i = amp * sin(freq * (y_i - x_i))`; no analytic Jacobian is registered, so
    /// gradients go through finite differences.
    SineCoupling { amp: T, freq: T },
}

impl<T: Scalar> DriftKernel<T> {
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            DriftKernel::Constant(c) => check_dim(dim, c.len()),
            DriftKernel::Affine {
                x_coef,
                y_coef,
                offset,
            } => {
                check_dim(dim, offset.len())?;
                for m in [x_coef, y_coef] {
                    check_dim(dim, m.rows())?;
                    check_dim(dim, m.cols())?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `out += b̃(x, y)`
    pub fn add_to(&self, x: &[T], y: &[T], out: &mut [T]) {
        match self {
            DriftKernel::Zero => {}
            DriftKernel::Constant(c) => linalg::axpy(T::one(), c, out),
            DriftKernel::MeanFieldOu { alpha, beta } => {
                for i in 0..out.len() {
                    out[i] += -*alpha * x[i] + *beta * (y[i] - x[i]);
                }
            }
            DriftKernel::Affine {
                x_coef,
                y_coef,
                offset,
            } => {
                for i in 0..out.len() {
                    out[i] += linalg::dot(x_coef.row(i), x) + linalg::dot(y_coef.row(i), y) + offset[i];
                }
            }
            DriftKernel::SineCoupling { amp, freq } => {
                for i in 0..out.len() {
                    out[i] += *amp * (*freq * (y[i] - x[i])).sin();
                }
            }
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        self.add_to(x, y, &mut out);
        out
    }

    /// Analytic `∂_x b̃(x, y)` when the catalog entry provides one.
    pub fn jacobian_x(&self, x: &[T], _y: &[T]) -> Option<Matrix<T>> {
        let d = x.len();
        match self {
            DriftKernel::Zero | DriftKernel::Constant(_) => Some(Matrix::zeros(d, d)),
            DriftKernel::MeanFieldOu { alpha, beta } => {
                Some(Matrix::scaled_identity(d, -(*alpha + *beta)))
            }
            DriftKernel::Affine { x_coef, .. } => Some(x_coef.clone()),
            DriftKernel::SineCoupling { .. } => None,
        }
    }

    /// Kernels affine in `y` integrate exactly against the mean of the measure.
    pub fn is_affine_in_measure(&self) -> bool {
        !matches!(self, DriftKernel::SineCoupling { .. })
    }

    pub fn depends_on_measure(&self) -> bool {
        match self {
            DriftKernel::Zero | DriftKernel::Constant(_) => false,
            DriftKernel::MeanFieldOu { beta, .. } => *beta != T::zero(),
            DriftKernel::Affine { y_coef, .. } => y_coef.as_slice().iter().any(|&v| v != T::zero()),
            DriftKernel::SineCoupling { amp, .. } => *amp != T::zero(),
        }
    }
}

/// Diffusion kernel catalog `σ̃ : R^d x R^d -> R^{d x d}`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionKernel<T> {
    Zero,
    Constant(Matrix<T>),
    /// `σ̃(x, y) = Σ₀ + diag(a ∘ x + c ∘ y)`
    Affine {
        base: Matrix<T>,
        x_diag: Vec<T>,
        y_diag: Vec<T>,
    },
}

impl<T: Scalar> DiffusionKernel<T> {
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            DiffusionKernel::Zero => Ok(()),
            DiffusionKernel::Constant(m) => {
                check_dim(dim, m.rows())?;
                check_dim(dim, m.cols())
            }
            DiffusionKernel::Affine {
                base,
                x_diag,
                y_diag,
            } => {
                check_dim(dim, base.rows())?;
                check_dim(dim, base.cols())?;
                check_dim(dim, x_diag.len())?;
                check_dim(dim, y_diag.len())
            }
        }
    }

    /// `out += σ̃(x, y)`
    pub fn add_to(&self, x: &[T], y: &[T], out: &mut Matrix<T>) {
        match self {
            DiffusionKernel::Zero => {}
            DiffusionKernel::Constant(m) => out.add_assign_scaled(T::one(), m),
            DiffusionKernel::Affine {
                base,
                x_diag,
                y_diag,
            } => {
                out.add_assign_scaled(T::one(), base);
                for i in 0..x.len() {
                    out[(i, i)] += x_diag[i] * x[i] + y_diag[i] * y[i];
                }
            }
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> Matrix<T> {
        let mut m = Matrix::zeros(x.len(), x.len());
        self.add_to(x, y, &mut m);
        m
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DiffusionKernel::Zero)
    }

    pub fn depends_on_measure(&self) -> bool {
        match self {
            DiffusionKernel::Affine { y_diag, .. } => y_diag.iter().any(|&v| v != T::zero()),
            _ => false,
        }
    }
}

/// Jump kernel catalog. Every entry factorises as `G̃(x, y, z) = γ(z) h(x, y)`, with the mark
/// amplitude `γ(z)` supplied by the jump model.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpKernel<T> {
    Zero,
    /// `h(x, y) = c₀ + c₁ x + c₂ y`
    Linear { c0: Vec<T>, c1: T, c2: T },
}

impl<T: Scalar> JumpKernel<T> {
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            JumpKernel::Zero => Ok(()),
            JumpKernel::Linear { c0, .. } => check_dim(dim, c0.len()),
        }
    }

    /// `out += h(x, y)`, the mark-independent factor.
    pub fn add_factor_to(&self, x: &[T], y: &[T], out: &mut [T]) {
        if let JumpKernel::Linear { c0, c1, c2 } = self {
            for i in 0..out.len() {
                out[i] += c0[i] + *c1 * x[i] + *c2 * y[i];
            }
        }
    }

    /// `G̃(x, y, z)` for a mark with amplitude `gamma`.
    pub fn eval(&self, x: &[T], y: &[T], gamma: T) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        self.add_factor_to(x, y, &mut out);
        linalg::scale(gamma, &mut out);
        out
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, JumpKernel::Zero)
    }

    pub fn depends_on_measure(&self) -> bool {
        matches!(self, JumpKernel::Linear { c2, .. } if *c2 != T::zero())
    }
}

/// The three kernels plus the constants used by the hypothesis checks.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCoefficients<T> {
    dim: usize,
    pub drift: DriftKernel<T>,
    pub diffusion: DiffusionKernel<T>,
    pub jump: JumpKernel<T>,
    /// Linear-growth constant `L`.
    pub growth: T,
    pub modulus: ConcaveModulus<T>,
}

impl<T: Scalar> KernelCoefficients<T> {
    pub fn new(
        dim: usize,
        drift: DriftKernel<T>,
        diffusion: DiffusionKernel<T>,
        jump: JumpKernel<T>,
        growth: T,
        modulus: ConcaveModulus<T>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        drift.check(dim)?;
        diffusion.check(dim)?;
        jump.check(dim)?;
        if !(growth > T::zero()) {
            return Err(Error::invalid("growth constant must be positive"));
        }
        Ok(KernelCoefficients {
            dim,
            drift,
            diffusion,
            jump,
            growth,
            modulus,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when no kernel reads its second argument, so a lone particle is an exact sampler
    /// of the one-particle law.
    pub fn is_measure_free(&self) -> bool {
        !(self.drift.depends_on_measure()
            || self.diffusion.depends_on_measure()
            || self.jump.depends_on_measure())
    }
}

/// Uniform empirical measure `(1/N) Σ δ_{X^j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    particles: Vec<T>,
    mean: Vec<T>,
}

impl<T: Scalar> EmpiricalMeasure<T> {
    /// From a flat buffer of `N * dim` coordinates.
    pub fn new(dim: usize, particles: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if particles.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if !particles.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: particles.len() % dim,
            });
        }
        let mean = mean_of(dim, &particles);
        Ok(EmpiricalMeasure {
            dim,
            particles,
            mean,
        })
    }

    pub fn from_points(points: &[Vec<T>]) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyMeasure)?.len();
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in points {
            check_dim(dim, p.len())?;
            flat.extend_from_slice(p);
        }
        Self::new(dim, flat)
    }

    pub fn dirac(x: &[T]) -> Self {
        EmpiricalMeasure {
            dim: x.len(),
            particles: x.to_vec(),
            mean: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.particles.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particle(&self, j: usize) -> &[T] {
        &self.particles[j * self.dim..(j + 1) * self.dim]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[T]> {
        self.particles.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.particles
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// `‖μ‖₂² = (1/N) Σ |X^j|²`
    pub fn second_moment(&self) -> T {
        self.particles().map(linalg::norm_sq).sum::<T>() / T::from_usize_lossy(self.len())
    }
}

fn mean_of<T: Scalar>(dim: usize, flat: &[T]) -> Vec<T> {
    let mut m = vec![T::zero(); dim];
    for p in flat.chunks_exact(dim) {
        linalg::axpy(T::one(), p, &mut m);
    }
    divide(&mut m, flat.len() / dim);
    m
}

fn divide<T: Scalar>(v: &mut [T], n: usize) {
    let n = T::from_usize_lossy(n);
    v.iter_mut().for_each(|x| *x /= n);
}

/// Nonnegative perturbation size `ρ(ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationRate<T> {
    Zero,
    Constant(T),
    /// `ρ(ε) = coef * ε^exponent`
    Power { coef: T, exponent: T },
}

impl<T: Scalar> PerturbationRate<T> {
    pub fn eval(&self, eps: T) -> T {
        match *self {
            PerturbationRate::Zero => T::zero(),
            PerturbationRate::Constant(c) => c,
            PerturbationRate::Power { coef, exponent } => {
                if eps <= T::zero() {
                    T::zero()
                } else {
                    coef * eps.powf(exponent)
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            PerturbationRate::Zero => true,
            PerturbationRate::Constant(c) => c >= T::zero(),
            PerturbationRate::Power { coef, exponent } => coef >= T::zero() && exponent > T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid perturbation rate {self:?}")))
        }
    }
}

/// Bounded perturbation direction `h(x)` with `|h(x)| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationDirection<T> {
    Zero,
    /// Fixed vector of norm at most one.
    Unit(Vec<T>),
    /// `h(x)_i = tanh(x_i) / √d`
    Tanh,
    /// `h(x)_i = sin(x_i) / √d`
    Sin,
}

impl<T: Scalar> PerturbationDirection<T> {
    /// `out += s * h(x)`
    pub fn add_scaled(&self, s: T, x: &[T], out: &mut [T]) {
        let inv = T::one() / T::from_usize_lossy(x.len()).sqrt();
        match self {
            PerturbationDirection::Zero => {}
            PerturbationDirection::Unit(v) => linalg::axpy(s, v, out),
            PerturbationDirection::Tanh => {
                for i in 0..out.len() {
                    out[i] += s * x[i].tanh() * inv;
                }
            }
            PerturbationDirection::Sin => {
                for i in 0..out.len() {
                    out[i] += s * x[i].sin() * inv;
                }
            }
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if let PerturbationDirection::Unit(v) = self {
            check_dim(dim, v.len())?;
            if linalg::norm(v) > T::one() + T::lit(1e-12) {
                return Err(Error::invalid("perturbation direction must have norm <= 1"));
            }
        }
        Ok(())
    }
}

/// `b_ε = b + ρ_b(ε) h_b`, `σ_ε = σ + ρ_σ(ε) diag(h_σ)`, `G_ε(·, z) = G(·, z) + ρ_G(ε) L₃(z) h_G`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFamily<T> {
    pub rho_b: PerturbationRate<T>,
    pub rho_sigma: PerturbationRate<T>,
    pub rho_g: PerturbationRate<T>,
    pub h_b: PerturbationDirection<T>,
    pub h_sigma: PerturbationDirection<T>,
    pub h_g: PerturbationDirection<T>,
}

impl<T: Scalar> Default for PerturbationFamily<T> {
    fn default() -> Self {
        Self::none()
    }
}

impl<T: Scalar> PerturbationFamily<T> {
    pub fn none() -> Self {
        PerturbationFamily {
            rho_b: PerturbationRate::Zero,
            rho_sigma: PerturbationRate::Zero,
            rho_g: PerturbationRate::Zero,
            h_b: PerturbationDirection::Zero,
            h_sigma: PerturbationDirection::Zero,
            h_g: PerturbationDirection::Zero,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.rho_b.check()?;
        self.rho_sigma.check()?;
        self.rho_g.check()?;
        self.h_b.check(dim)?;
        self.h_sigma.check(dim)?;
        self.h_g.check(dim)
    }

    pub fn is_none(&self) -> bool {
        let zero = |r: &PerturbationRate<T>| r.eval(T::one()) == T::zero();
        zero(&self.rho_b) && zero(&self.rho_sigma) && zero(&self.rho_g)
    }
}

/// Selector for [`eval_mean_field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    Drift,
    Diffusion,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeanFieldValue<T> {
    Vector(Vec<T>),
    Matrix(Matrix<T>),
}

fn check_args<T: Scalar>(coeffs: &KernelCoefficients<T>, x: &[T], mu: &EmpiricalMeasure<T>) -> Result<()> {
    check_dim(coeffs.dim, x.len())?;
    check_dim(coeffs.dim, mu.dim())?;
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    Ok(())
}

/// `b(x, μ)` or `σ(x, μ)`: the kernel averaged over the particles of `μ`.
pub fn eval_mean_field<T: Scalar>(
    coeffs: &KernelCoefficients<T>,
    which: Coefficient,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
) -> Result<MeanFieldValue<T>> {
    check_args(coeffs, x, mu)?;
    Ok(match which {
        Coefficient::Drift => {
            let mut out = vec![T::zero(); coeffs.dim];
            mean_drift_into(coeffs, x, mu, &mut out);
            MeanFieldValue::Vector(out)
        }
        Coefficient::Diffusion => {
            let mut m = Matrix::zeros(coeffs.dim, coeffs.dim);
            mean_diffusion_into(coeffs, x, mu, &mut m);
            MeanFieldValue::Matrix(m)
        }
    })
}

/// `out = (1/N) Σ_j b̃(x, X^j)`; no argument checks.
pub(crate) fn mean_drift_into<T: Scalar>(
    coeffs: &KernelCoefficients<T>,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    out: &mut [T],
) {
    out.iter_mut().for_each(|v| *v = T::zero());
    if matches!(coeffs.drift, DriftKernel::Zero) {
        return;
    }
    if coeffs.drift.is_affine_in_measure() {
        coeffs.drift.add_to(x, mu.mean(), out);
        return;
    }
    for y in mu.particles() {
        coeffs.drift.add_to(x, y, out);
    }
    divide(out, mu.len());
}

pub(crate) fn mean_diffusion_into<T: Scalar>(
    coeffs: &KernelCoefficients<T>,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    out: &mut Matrix<T>,
) {
    out.fill_zero();
    match &coeffs.diffusion {
        DiffusionKernel::Zero => {}
        DiffusionKernel::Constant(m) => out.add_assign_scaled(T::one(), m),
        kernel => kernel.add_to(x, mu.mean(), out),
    }
}

/// `(1/N) Σ_j h(x, X^j)` (the kernel is affine in `y`), the mark-independent factor of `G(x, μ, z)`.
pub(crate) fn mean_jump_factor_into<T: Scalar>(
    coeffs: &KernelCoefficients<T>,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    out: &mut [T],
) {
    out.iter_mut().for_each(|v| *v = T::zero());
    coeffs.jump.add_factor_to(x, mu.mean(), out);
}

/// `G(x, μ, z) = (1/N) Σ_j G̃(x, X^j, z)` for a mark with amplitude `gamma`.
pub fn eval_jump_mean_field<T: Scalar>(
    coeffs: &KernelCoefficients<T>,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    gamma: T,
) -> Result<Vec<T>> {
    check_args(coeffs, x, mu)?;
    let mut out = vec![T::zero(); coeffs.dim];
    mean_jump_factor_into(coeffs, x, mu, &mut out);
    linalg::scale(gamma, &mut out);
    Ok(out)
}

/// Finite-difference step used when no analytic Jacobian is available.
pub fn fd_step<T: Scalar>(x: &[T]) -> T {
    T::lit(1e-6) * (T::one() + linalg::norm(x))
}

/// `∇b(x, μ) = (1/N) Σ_j ∂_x b̃(x, X^j)`, analytic when the catalog provides it and central
/// finite differences otherwise.
pub fn grad_b<T: Scalar>(
    coeffs: &KernelCoefficients<T>,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
) -> Result<Matrix<T>> {
    check_args(coeffs, x, mu)?;
    if coeffs.drift.is_affine_in_measure() {
        if let Some(j) = coeffs.drift.jacobian_x(x, mu.mean()) {
            return Ok(j);
        }
    }
    grad_b_finite_difference(coeffs, x, mu, fd_step(x))
}

/// Central finite-difference Jacobian of `x ↦ b(x, μ)` with step `h`.
pub fn grad_b_finite_difference<T: Scalar>(
    coeffs: &KernelCoefficients<T>,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    h: T,
) -> Result<Matrix<T>> {
    check_args(coeffs, x, mu)?;
    let d = coeffs.dim;
    let mut jac = Matrix::zeros(d, d);
    let mut xp = x.to_vec();
    let mut fp = vec![T::zero(); d];
    let mut fm = vec![T::zero(); d];
    for j in 0..d {
        xp[j] = x[j] + h;
        mean_drift_into(coeffs, &xp, mu, &mut fp);
        xp[j] = x[j] - h;
        mean_drift_into(coeffs, &xp, mu, &mut fm);
        xp[j] = x[j];
        for i in 0..d {
            jac[(i, j)] = (fp[i] - fm[i]) / (h + h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(drift: DriftKernel<f64>, dim: usize) -> KernelCoefficients<f64> {
        KernelCoefficients::new(
            dim,
            drift,
            DiffusionKernel::Zero,
            JumpKernel::Zero,
            1.0,
            ConcaveModulus::Linear(1.0),
        )
        .unwrap()
    }

    fn y_minus_x() -> DriftKernel<f64> {
        DriftKernel::Affine {
            x_coef: Matrix::scaled_identity(1, -1.0),
            y_coef: Matrix::identity(1),
            offset: vec![0.0],
        }
    }

    fn drift(c: &KernelCoefficients<f64>, x: &[f64], mu: &EmpiricalMeasure<f64>) -> Vec<f64> {
        match eval_mean_field(c, Coefficient::Drift, x, mu).unwrap() {
            MeanFieldValue::Vector(v) => v,
            MeanFieldValue::Matrix(_) => unreachable!(),
        }
    }

    #[test]
    fn drift_examples() {
        let c = coeffs(y_minus_x(), 1);
        let mu = EmpiricalMeasure::from_points(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(drift(&c, &[1.0], &mu), vec![0.0]);

        let ou = coeffs(DriftKernel::MeanFieldOu { alpha: 0.7, beta: 1.3 }, 1);
        assert_eq!(drift(&ou, &[2.0], &EmpiricalMeasure::dirac(&[2.0])), vec![-0.7 * 2.0]);

        let pick_y = coeffs(
            DriftKernel::Affine {
                x_coef: Matrix::zeros(1, 1),
                y_coef: Matrix::identity(1),
                offset: vec![0.0],
            },
            1,
        );
        let mu = EmpiricalMeasure::from_points(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        for x in [-5.0, 0.0, 17.0] {
            assert_eq!(drift(&pick_y, &[x], &mu), vec![2.0]);
        }
    }

    #[test]
    fn dirac_identity_is_exact() {
        let c = KernelCoefficients::new(
            2,
            DriftKernel::SineCoupling { amp: 0.3, freq: 2.0 },
            DiffusionKernel::Affine {
                base: Matrix::identity(2),
                x_diag: vec![0.1, 0.2],
                y_diag: vec![0.3, -0.1],
            },
            JumpKernel::Zero,
            1.0,
            ConcaveModulus::Linear(1.0),
        )
        .unwrap();
        let x = [0.3, -1.1];
        let y = [1.7, 0.4];
        let mu = EmpiricalMeasure::dirac(&y);
        assert_eq!(drift(&c, &x, &mu), c.drift.eval(&x, &y));
        match eval_mean_field(&c, Coefficient::Diffusion, &x, &mu).unwrap() {
            MeanFieldValue::Matrix(m) => assert_eq!(m, c.diffusion.eval(&x, &y)),
            MeanFieldValue::Vector(_) => unreachable!(),
        }
    }

    #[test]
    fn jump_mean_field_examples() {
        let mut c = coeffs(DriftKernel::Zero, 1);
        c.jump = JumpKernel::Linear { c0: vec![0.4], c1: 0.0, c2: 0.0 };
        let mu = EmpiricalMeasure::from_points(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(eval_jump_mean_field(&c, &[9.0], &mu, 1.5).unwrap(), vec![1.5 * 0.4]);
        c.jump = JumpKernel::Linear { c0: vec![0.0], c1: 0.0, c2: 1.0 };
        assert_eq!(eval_jump_mean_field(&c, &[9.0], &mu, 1.5).unwrap(), vec![1.5]);

        // mixed kernel against a three-particle cloud: direct summation oracle
        c.jump = JumpKernel::Linear { c0: vec![0.2], c1: -0.5, c2: 0.25 };
        let pts = [0.5, -1.0, 4.0];
        let mu = EmpiricalMeasure::from_points(&pts.map(|p| vec![p])).unwrap();
        let x = 1.3;
        let gamma = 0.8;
        let oracle: f64 = pts.iter().map(|&y| gamma * (0.2 - 0.5 * x + 0.25 * y)).sum::<f64>() / 3.0;
        let got = eval_jump_mean_field(&c, &[x], &mu, gamma).unwrap()[0];
        assert!((got - oracle).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let c = coeffs(DriftKernel::Zero, 2);
        let mu = EmpiricalMeasure::from_points(&[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            eval_mean_field(&c, Coefficient::Drift, &[1.0], &mu),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(EmpiricalMeasure::<f64>::new(2, vec![]), Err(Error::EmptyMeasure)));
        assert!(EmpiricalMeasure::<f64>::from_points(&[]).is_err());
    }

    #[test]
    fn grad_examples() {
        let ou = coeffs(DriftKernel::MeanFieldOu { alpha: 0.5, beta: 2.0 }, 3);
        let mu = EmpiricalMeasure::from_points(&[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, -1.0]]).unwrap();
        let g = grad_b(&ou, &[0.1, 0.2, 0.3], &mu).unwrap();
        assert_eq!(g, Matrix::scaled_identity(3, -2.5));
        let k = coeffs(DriftKernel::Constant(vec![1.0, 2.0, 3.0]), 3);
        assert_eq!(grad_b(&k, &[0.1, 0.2, 0.3], &mu).unwrap(), Matrix::zeros(3, 3));
    }

    #[test]
    fn sine_coupling_uses_finite_differences() {
        let c = coeffs(DriftKernel::SineCoupling { amp: 0.5, freq: 1.5 }, 1);
        let mu = EmpiricalMeasure::from_points(&[vec![0.2], vec![-0.4]]).unwrap();
        let x = 0.7;
        let g = grad_b(&c, &[x], &mu).unwrap()[(0, 0)];
        let exact: f64 = [0.2f64, -0.4]
            .iter()
            .map(|&y| -0.5 * 1.5 * (1.5 * (y - x)).cos())
            .sum::<f64>()
            / 2.0;
        assert!((g - exact).abs() < 1e-8, "{g} vs {exact}");
    }

    #[test]
    fn modulus_values() {
        let m = ConcaveModulus::log_cap(0.1).unwrap();
        assert_eq!(m.eval(0.0), 0.0);
        assert!((m.eval(0.05) - 0.05 * 20f64.ln()).abs() < 1e-15);
        // continuity at the cap
        let below = m.eval(0.1 - 1e-12);
        let above = m.eval(0.1 + 1e-12);
        assert!((below - above).abs() < 1e-10);
        assert!(ConcaveModulus::log_cap(0.5).is_err());
        assert!(ConcaveModulus::linear(0.0).is_err());
    }

    #[test]
    fn perturbation_rates() {
        let p = PerturbationRate::Power { coef: 2.0, exponent: 0.5 };
        assert_eq!(p.eval(0.25), 1.0);
        assert_eq!(p.eval(0.0), 0.0);
        let fam = PerturbationFamily::<f64> {
            h_b: PerturbationDirection::Unit(vec![2.0]),
            ..PerturbationFamily::none()
        };
        assert!(fam.validate(1).is_err());
        assert!(PerturbationFamily::<f64>::none().is_none());
    }
}
