//! Wasserstein distances, Bihari bounds, Monte Carlo tail estimation and convergence studies.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::coefficients::{ConcaveModulus, EmpiricalMeasure};
use crate::dynamics::{simulate_controlled, simulate_particles, solve_limit, ModerateScale, Problem};
use crate::error::{check_dim, Error, Result};
use crate::grid::{Path, TimeGrid};
use crate::linalg;
use crate::rate::Event;
use crate::rng;
use crate::scalar::Scalar;
use crate::skeleton::{solve_ldp_skeleton, ControlPair};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W2<T> {
    pub value: T,
    /// Set when `value` is the paired-coupling upper bound rather than the exact distance.
    pub bound_only: bool,
}

/// `W₂(μ, ν)`: exact in one dimension (quantile coupling, any particle counts), the paired
/// bound `((1/N) Σ |X_i - Y_i|²)^{1/2}` otherwise.
pub fn wasserstein2<T: Scalar>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>) -> Result<W2<T>> {
    check_dim(mu.dim(), nu.dim())?;
    if mu.dim() == 1 {
        return Ok(W2 {
            value: w2_exact_1d(mu.as_slice(), nu.as_slice()),
            bound_only: false,
        });
    }
    Ok(W2 {
        value: w2_paired(mu, nu)?,
        bound_only: true,
    })
}

/// `((1/N) Σ |X_i - Y_i|²)^{1/2}` for index-paired particles.
pub fn w2_paired<T: Scalar>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>) -> Result<T> {
    check_dim(mu.dim(), nu.dim())?;
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    let s: T = mu
        .particles()
        .zip(nu.particles())
        .map(|(a, b)| linalg::norm_sq(&linalg::sub(a, b)))
        .sum();
    Ok((s / T::from_usize_lossy(mu.len())).sqrt())
}

fn sorted<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite particles"));
    s
}

/// `∫₀¹ |F⁻¹(u) - G⁻¹(u)|² du` over the merged quantile breakpoints.
fn w2_exact_1d<T: Scalar>(x: &[T], y: &[T]) -> T {
    let xs = sorted(x);
    let ys = sorted(y);
    let (n, m) = (xs.len(), ys.len());
    if n == m {
        let s: T = xs.iter().zip(&ys).map(|(&a, &b)| (a - b) * (a - b)).sum();
        return (s / T::from_usize_lossy(n)).sqrt();
    }
    // breakpoints i/n and j/m, walked on the common denominator n*m
    let (mut i, mut j) = (0usize, 0usize);
    let (mut pos, total) = (0usize, n * m);
    let mut acc = T::zero();
    while pos < total {
        let next_x = (i + 1) * m;
        let next_y = (j + 1) * n;
        let next = next_x.min(next_y);
        let d = xs[i] - ys[j];
        acc += d * d * T::from_usize_lossy(next - pos);
        pos = next;
        if next == next_x {
            i += 1;
        }
        if next == next_y {
            j += 1;
        }
    }
    (acc / T::from_usize_lossy(total)).sqrt()
}

/// `ϱ` in Bihari's inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateModulus<T> {
    Concave(ConcaveModulus<T>),
    /// `ϱ(s) = scale · s^exponent`
    Power { scale: T, exponent: T },
}

impl<T: Scalar> RateModulus<T> {
    pub fn eval(&self, s: T) -> T {
        match *self {
            RateModulus::Concave(k) => k.eval(s),
            RateModulus::Power { scale, exponent } => scale * s.powf(exponent),
        }
    }

    fn check(&self) -> Result<()> {
        if let RateModulus::Power { scale, exponent } = *self {
            if !(scale > T::zero()) || !(exponent > T::zero()) {
                return Err(Error::invalid("power modulus needs scale > 0 and exponent > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BihariSpec<T> {
    pub c: T,
    /// `q` at the grid nodes.
    pub q: Vec<T>,
    pub modulus: RateModulus<T>,
    pub grid: TimeGrid<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BihariBound<T> {
    pub times: Vec<T>,
    pub integral_q: Vec<T>,
    /// `f⁻¹(f(C) + ∫₀ᵗ q)`, `+∞` once the argument leaves the range of `f`.
    pub bound: Vec<T>,
}

impl<T: Scalar> BihariBound<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,integral_q,bound")?;
        for ((t, iq), b) in self.times.iter().zip(&self.integral_q).zip(&self.bound) {
            writeln!(w, "{t},{iq},{b}")?;
        }
        Ok(())
    }
}

fn simpson<T: Scalar>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

fn adaptive_simpson<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T, tol: T, depth: u32) -> T {
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_rec<T: Scalar>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= T::lit(15.0) * tol {
        return left + right + diff / T::lit(15.0);
    }
    adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol * half, depth - 1)
        + adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol * half, depth - 1)
}

/// Bihari's bound `g(t) <= f⁻¹(f(C) + ∫₀ᵗ q)` with `f(r) = ∫₁ʳ ds/ϱ(s)`, evaluated on the grid.
pub fn bihari_bound<T: Scalar>(spec: &BihariSpec<T>) -> Result<BihariBound<T>> {
    spec.modulus.check()?;
    if !(spec.c > T::zero()) || !spec.c.is_finite() {
        return Err(Error::invalid(format!("Bihari constant must be positive, got {}", spec.c)));
    }
    let nodes = spec.grid.steps() + 1;
    check_dim(nodes, spec.q.len())?;
    if spec.q.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(Error::invalid("q must be finite and nonnegative"));
    }
    let rho = spec.modulus;
    let inv = |s: T| T::one() / rho.eval(s);
    if !(rho.eval(spec.c) > T::zero()) {
        return Err(Error::invalid("modulus is not positive at C"));
    }
    let tol = T::lit(1e-15);
    // f measured from C: F(r) = ∫_C^r ds/ϱ = f(r) - f(C); only F is needed.
    let big_f = |r: T| adaptive_simpson(&inv, spec.c, r, tol * (T::one() + (r - spec.c).abs()), 50);

    let dt = spec.grid.dt();
    let half = T::lit(0.5);
    let mut integral_q = Vec::with_capacity(nodes);
    let mut acc = T::zero();
    integral_q.push(acc);
    for k in 1..nodes {
        acc += half * dt * (spec.q[k - 1] + spec.q[k]);
        integral_q.push(acc);
    }

    let cap = T::lit(1e150);
    let mut bound = Vec::with_capacity(nodes);
    let mut lo = spec.c;
    let mut blown = false;
    for &target in &integral_q {
        if blown {
            bound.push(T::infinity());
            continue;
        }
        if target == T::zero() {
            bound.push(spec.c);
            continue;
        }
        // bracket [lo, hi] with F(lo) <= target <= F(hi), piecewise to keep quadrature short
        let mut hi = lo.max(spec.c) * T::lit(2.0);
        let mut f_lo = big_f(lo);
        let mut f_hi = f_lo + adaptive_simpson(&inv, lo, hi, tol * (T::one() + hi), 50);
        while f_hi < target {
            if hi > cap || !f_hi.is_finite() {
                blown = true;
                break;
            }
            lo = hi;
            f_lo = f_hi;
            hi *= T::lit(2.0);
            f_hi = f_lo + adaptive_simpson(&inv, lo, hi, tol * (T::one() + hi), 50);
        }
        if blown {
            bound.push(T::infinity());
            continue;
        }
        let (mut a, mut b) = (lo, hi);
        let mut fa = f_lo;
        for _ in 0..200 {
            let m = (a + b) * half;
            if b - a <= T::lit(1e-13) * (T::one() + m.abs()) {
                break;
            }
            let fm = fa + adaptive_simpson(&inv, a, m, tol * (T::one() + m), 50);
            if fm < target {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        let root = (a + b) * half;
        bound.push(root);
        lo = a;
    }
    Ok(BihariBound {
        times: (0..nodes).map(|k| spec.grid.time(k)).collect(),
        integral_q,
        bound,
    })
}

/// Weighted least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit<T> {
    pub intercept: T,
    pub slope: T,
    pub intercept_se: T,
    pub slope_se: T,
}

pub fn weighted_fit<T: Scalar>(x: &[T], y: &[T], w: &[T]) -> Result<LinearFit<T>> {
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), w.len())?;
    if x.is_empty() {
        return Err(Error::Numerical("no points to fit".into()));
    }
    let sw: T = w.iter().copied().sum();
    let mx = x.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let my = y.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    if x.len() == 1 {
        return Ok(LinearFit {
            intercept: y[0],
            slope: T::zero(),
            intercept_se: T::infinity(),
            slope_se: T::infinity(),
        });
    }
    let sxx: T = x.iter().zip(w).map(|(&a, &b)| b * (a - mx) * (a - mx)).sum();
    let sxy: T = x.iter().zip(y).zip(w).map(|((&a, &c), &b)| b * (a - mx) * (c - my)).sum();
    if sxx == T::zero() {
        return Err(Error::Numerical("degenerate abscissae in fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // with inverse-variance weights the parameter covariance is (XᵀWX)⁻¹
    let slope_var = T::one() / sxx;
    let intercept_var = T::one() / sw + mx * mx / sxx;
    Ok(LinearFit {
        intercept,
        slope,
        intercept_se: intercept_var.sqrt(),
        slope_se: slope_var.sqrt(),
    })
}

/// Ordinary least squares with residual-based standard errors.
pub fn ols_fit<T: Scalar>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    let w = vec![T::one(); x.len()];
    let mut fit = weighted_fit(x, y, &w)?;
    let n = x.len();
    if n > 2 {
        let rss: T = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| {
                let r = b - fit.intercept - fit.slope * a;
                r * r
            })
            .sum();
        let s2 = rss / T::from_usize_lossy(n - 2);
        fit.slope_se *= s2.sqrt();
        fit.intercept_se *= s2.sqrt();
    }
    Ok(fit)
}

fn check_eps_grid<T: Scalar>(eps: &[T], allow_zero: bool) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::invalid("epsilon grid is empty"));
    }
    for w in eps.windows(2) {
        if !(w[0] > w[1]) {
            return Err(Error::invalid("epsilon grid must be strictly decreasing"));
        }
    }
    let lo = *eps.last().expect("nonempty");
    if !(lo > T::zero() || allow_zero && lo == T::zero()) || eps[0] > T::one() {
        return Err(Error::invalid("epsilon values must lie in (0, 1]"));
    }
    Ok(())
}

/// Minimum hits for an `ε` to enter the tail fit.
pub const MIN_HITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TailRow<T> {
    pub epsilon: T,
    pub speed: T,
    pub hits: usize,
    pub trials: usize,
    pub p: T,
    pub std_err: T,
    /// `speed · log p`, `-∞` when nothing was hit.
    pub scaled_log: T,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate<T> {
    pub rows: Vec<TailRow<T>>,
    /// Fit of `speed · log p` against the speed; `-intercept` estimates the rate.
    pub fit: LinearFit<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> TailEstimate<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "epsilon,speed,hits,trials,p,std_err,scaled_log,used")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.epsilon, r.speed, r.hits, r.trials, r.p, r.std_err, r.scaled_log, r.used
            )?;
        }
        Ok(())
    }
}

/// Monte Carlo setup shared by tail estimates and convergence studies.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo<T> {
    pub grid: TimeGrid<T>,
    pub replicas: usize,
    /// Particles per replica; `1` is exact when the coefficients do not read the measure.
    pub particles: usize,
    pub seed: u64,
}

impl<T: Scalar> MonteCarlo<T> {
    fn check(&self) -> Result<()> {
        if self.replicas == 0 || self.particles == 0 {
            return Err(Error::invalid("need at least one replica and one particle"));
        }
        Ok(())
    }

    /// Seed of replica `r`; shared by every `ε` so that runs use common random numbers.
    pub fn replica_seed(&self, r: usize) -> u64 {
        rng::derive_seed(self.seed, rng::TAG_REPLICA, &[r as u64])
    }
}

fn hits_event<T: Scalar>(event: &Event<T>, path: &Path<T>, limit: &Path<T>, inv_lambda: Option<T>) -> bool {
    let deviation = |k: usize| -> Vec<T> {
        let x = path.point(k);
        match inv_lambda {
            Some(s) => x.iter().zip(limit.point(k)).map(|(&a, &b)| (a - b) * s).collect(),
            None => x.to_vec(),
        }
    };
    match event {
        Event::TerminalHalfspace { normal, level } => {
            linalg::dot(normal, &deviation(path.len() - 1)) >= *level
        }
        Event::SupNorm {
            threshold,
            relative_to_limit,
        } => (0..path.len()).any(|k| {
            let v = deviation(k);
            let n = if inv_lambda.is_none() && *relative_to_limit {
                linalg::dist(&v, limit.point(k))
            } else {
                linalg::norm(&v)
            };
            n >= *threshold
        }),
        Event::TerminalPoint(_) => false,
    }
}

/// Estimates `P(X^ε ∈ event)` (or `P(M^ε ∈ event)` when a moderate scale is given) on a grid of
/// noise levels and fits the scaled log-probabilities against the speed.
pub fn estimate_tail<T: Scalar>(
    problem: &Problem<T>,
    event: &Event<T>,
    epsilon_grid: &[T],
    mc: &MonteCarlo<T>,
    scale: Option<&ModerateScale<T>>,
) -> Result<TailEstimate<T>> {
    mc.check()?;
    check_eps_grid(epsilon_grid, false)?;
    if matches!(event, Event::TerminalPoint(_)) {
        return Err(Error::invalid("point events have probability zero; use a halfspace"));
    }
    if let Event::TerminalHalfspace { normal, .. } = event {
        check_dim(problem.dim(), normal.len())?;
    }
    let limit = solve_limit(problem, mc.grid)?;
    let limit_path = &limit.states[0];
    let mut rows = Vec::with_capacity(epsilon_grid.len());
    let mut warnings = Vec::new();
    for &eps in epsilon_grid {
        let inv_lambda = scale.map(|s| T::one() / s.lambda(eps));
        let counts: Vec<Result<usize>> = (0..mc.replicas)
            .into_par_iter()
            .map(|r| {
                let b = simulate_particles(problem, mc.grid, eps, mc.particles, mc.replica_seed(r))?;
                Ok(b.states
                    .iter()
                    .filter(|p| hits_event(event, p, limit_path, inv_lambda))
                    .count())
            })
            .collect();
        let mut hits = 0;
        for c in counts {
            hits += c?;
        }
        let trials = mc.replicas * mc.particles;
        let n = T::from_usize_lossy(trials);
        let p = T::from_usize_lossy(hits) / n;
        let speed = scale.map_or(eps, |s| s.speed(eps));
        let used = hits >= MIN_HITS;
        if !used {
            warnings.push(format!("epsilon {eps} dropped: {hits} hits < {MIN_HITS}"));
        }
        rows.push(TailRow {
            epsilon: eps,
            speed,
            hits,
            trials,
            p,
            std_err: (p * (T::one() - p) / n).sqrt(),
            scaled_log: if hits == 0 { T::neg_infinity() } else { speed * p.ln() },
            used,
        });
    }
    let used: Vec<&TailRow<T>> = rows.iter().filter(|r| r.used).collect();
    if used.is_empty() {
        return Err(Error::Numerical("event too rare at every epsilon".into()));
    }
    let half = T::lit(0.5);
    let x: Vec<T> = used.iter().map(|r| r.speed).collect();
    let y: Vec<T> = used.iter().map(|r| r.scaled_log).collect();
    let w: Vec<T> = used
        .iter()
        .map(|r| {
            let n = T::from_usize_lossy(r.trials);
            let pt = (T::from_usize_lossy(r.hits) + half) / (n + T::one());
            let var = r.speed * r.speed * (T::one() - pt) / (n * pt);
            T::one() / var
        })
        .collect();
    let fit = weighted_fit(&x, &y, &w)?;
    Ok(TailEstimate { rows, fit, warnings })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StudyMode<T> {
    /// `E sup |X^ε - X⁰|²`
    Limit,
    /// As `Limit`, also reporting the constant in front of `ε + ρ_b² + ερ_σ² + ερ_G²`.
    Rate,
    /// `E sup |Z^{ε,u} - Y^u|²` for a fixed control.
    Controlled(ControlPair<T>),
}

impl<T> StudyMode<T> {
    pub fn name(&self) -> &'static str {
        match self {
            StudyMode::Limit => "limit",
            StudyMode::Rate => "rate",
            StudyMode::Controlled(_) => "controlled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<T> {
    pub epsilon: T,
    pub mean_sq_sup: T,
    pub std_err: T,
    /// `ε + ρ_b² + ε ρ_σ² + ε ρ_G²`
    pub bound_scale: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub mode: &'static str,
    pub rows: Vec<ConvergenceRow<T>>,
    /// Log-log fit of the mean-square sup distance against `ε`.
    pub fit: LinearFit<T>,
    /// `max_ε value / bound_scale` in rate mode.
    pub c_hat: Option<T>,
}

impl<T: Scalar> ConvergenceReport<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "mode,epsilon,mean_sq_sup,std_err,bound_scale")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.mode, r.epsilon, r.mean_sq_sup, r.std_err, r.bound_scale
            )?;
        }
        Ok(())
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_sq_sup < w[0].mean_sq_sup)
    }
}

/// Mean-square sup distance between the noisy solutions and their deterministic counterpart,
/// with common random numbers across the `ε` grid.
pub fn convergence_study<T: Scalar>(
    problem: &Problem<T>,
    epsilon_grid: &[T],
    mc: &MonteCarlo<T>,
    mode: &StudyMode<T>,
) -> Result<ConvergenceReport<T>> {
    mc.check()?;
    check_eps_grid(epsilon_grid, false)?;
    let limit = solve_limit(problem, mc.grid)?;
    let reference = match mode {
        StudyMode::Controlled(u) => solve_ldp_skeleton(problem, &limit, u, false)?.path,
        _ => limit.states[0].clone(),
    };
    let fam = &problem.family;
    let mut rows = Vec::with_capacity(epsilon_grid.len());
    for &eps in epsilon_grid {
        let per_replica: Vec<Result<Vec<T>>> = (0..mc.replicas)
            .into_par_iter()
            .map(|r| {
                let seed = mc.replica_seed(r);
                let b = simulate_particles(problem, mc.grid, eps, mc.particles, seed)?;
                let paths = match mode {
                    StudyMode::Controlled(u) => {
                        let laws = b.laws();
                        simulate_controlled(problem, &laws, u, eps, mc.particles, seed)?.states
                    }
                    _ => b.states,
                };
                Ok(paths
                    .iter()
                    .map(|p| {
                        let s = p.sup_distance(&reference);
                        s * s
                    })
                    .collect())
            })
            .collect();
        let mut values = Vec::with_capacity(mc.replicas * mc.particles);
        for v in per_replica {
            values.extend(v?);
        }
        let n = T::from_usize_lossy(values.len());
        let mean = values.iter().copied().sum::<T>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one())
        } else {
            T::zero()
        };
        let (rb, rs, rg) = (fam.rho_b.eval(eps), fam.rho_sigma.eval(eps), fam.rho_g.eval(eps));
        rows.push(ConvergenceRow {
            epsilon: eps,
            mean_sq_sup: mean,
            std_err: (var / n).sqrt(),
            bound_scale: eps + rb * rb + eps * rs * rs + eps * rg * rg,
        });
    }
    let positive: Vec<&ConvergenceRow<T>> = rows.iter().filter(|r| r.mean_sq_sup > T::zero()).collect();
    let fit = if positive.len() >= 2 {
        let x: Vec<T> = positive.iter().map(|r| r.epsilon.ln()).collect();
        let y: Vec<T> = positive.iter().map(|r| r.mean_sq_sup.ln()).collect();
        ols_fit(&x, &y)?
    } else {
        LinearFit {
            intercept: T::nan(),
            slope: T::nan(),
            intercept_se: T::infinity(),
            slope_se: T::infinity(),
        }
    };
    let c_hat = matches!(mode, StudyMode::Rate).then(|| {
        rows.iter()
            .fold(T::zero(), |m, r| m.max(r.mean_sq_sup / r.bound_scale))
    });
    Ok(ConvergenceReport {
        mode: mode.name(),
        rows,
        fit,
        c_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: &[f64]) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::new(1, v.to_vec()).unwrap()
    }

    #[test]
    fn w2_examples() {
        assert_eq!(wasserstein2(&m1(&[0.3]), &m1(&[1.1])).unwrap().value, (0.3f64 - 1.1).abs());
        assert_eq!(wasserstein2(&m1(&[0.0, 2.0]), &m1(&[3.0, 1.0])).unwrap().value, 1.0);
        assert_eq!(wasserstein2(&m1(&[4.0, 1.0, 2.0]), &m1(&[1.0, 2.0, 4.0])).unwrap().value, 0.0);
        // unequal counts: δ_0 vs ½(δ_0 + δ_2) moves half the mass by 2
        let w = wasserstein2(&m1(&[0.0]), &m1(&[0.0, 2.0])).unwrap();
        assert!((w.value - 2f64.sqrt()).abs() < 1e-15);
        let a = EmpiricalMeasure::from_points(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = EmpiricalMeasure::from_points(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let w = wasserstein2(&a, &b).unwrap();
        assert!(w.bound_only);
        assert!((w.value - 0.5f64.sqrt()).abs() < 1e-15);
        let c = EmpiricalMeasure::from_points(&[vec![0.0, 1.0]]).unwrap();
        assert!(wasserstein2(&a, &c).is_err());
    }

    #[test]
    fn bihari_examples() {
        let grid = TimeGrid::<f64>::new(1.0, 1000).unwrap();
        let lin = RateModulus::Concave(ConcaveModulus::Linear(1.0));
        let b = bihari_bound(&BihariSpec { c: 1.0, q: vec![1.0; 1001], modulus: lin, grid }).unwrap();
        for (t, g) in b.times.iter().zip(&b.bound) {
            assert!((g - t.exp()).abs() < 1e-9, "t={t} {g}");
        }
        let b = bihari_bound(&BihariSpec { c: 0.7, q: vec![0.0; 1001], modulus: lin, grid }).unwrap();
        assert!(b.bound.iter().all(|&g| g == 0.7));
        let root = RateModulus::Power { scale: 1.0, exponent: 0.5 };
        let b = bihari_bound(&BihariSpec { c: 0.25, q: vec![1.0; 1001], modulus: root, grid }).unwrap();
        for (t, g) in b.times.iter().zip(&b.bound) {
            let exact = (0.5 + t / 2.0).powi(2);
            assert!((g - exact).abs() < 1e-8, "t={t} {g} {exact}");
        }
    }

    #[test]
    fn bihari_blow_up_is_infinite() {
        // ϱ(s) = s², f(r) = 1 - 1/r is bounded by 1: from C = 1 the bound blows up at ∫q = 1
        let grid = TimeGrid::<f64>::new(2.0, 200).unwrap();
        let sq = RateModulus::Power { scale: 1.0, exponent: 2.0 };
        let b = bihari_bound(&BihariSpec { c: 1.0, q: vec![1.0; 201], modulus: sq, grid }).unwrap();
        assert!((b.bound[50] - 2.0).abs() < 1e-8);
        assert!(b.bound[150].is_infinite());
    }

    #[test]
    fn fits() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0];
        let f = weighted_fit::<f64>(&x, &y, &[1.0, 2.0, 3.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        let f = ols_fit(&x, &y).unwrap();
        assert!(f.slope_se.abs() < 1e-12);
    }
}
