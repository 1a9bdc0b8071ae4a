//! Finite-intensity mark spaces, Poisson random measure sampling and the entropy energy `Q₂`.
//!
//! A PRM `N` on `[0,T] x Z x [0,∞)` with intensity `Leb ⊗ ν ⊗ Leb` is realised strip by strip
//! along the `r` axis: strip `j` covers `r ∈ [j, j+1)`, carries `Poisson(ν(Z) T)` points and
//! owns its own random stream. The controlled measure `N^{ε⁻¹ψ}` keeps the points with
//! `r <= ψ(s,z)/ε`. Because the strips do not depend on `ε` or `ψ`, runs at different noise
//! levels or under different controls see nested point sets drawn from one realisation of `N`.

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;

use crate::error::{check_dim, Error, Result};
use crate::grid::TimeGrid;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum MarkSpace<T> {
    Finite,
    /// Midpoint quadrature of a density on `[a, b]`.
    Interval { a: T, b: T },
}

/// Mark space `Z` with finite intensity `ν`, per-mark amplitude `γ` and bounding functions.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel<T> {
    space: MarkSpace<T>,
    marks: Vec<T>,
    weights: Vec<T>,
    gamma: Vec<T>,
    l1: Vec<T>,
    l2: Vec<T>,
    l3: Vec<T>,
    total_mass: T,
}

/// Per-mark values of the bounding functions `L₁, L₂, L₃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T> {
    pub l1: Vec<T>,
    pub l2: Vec<T>,
    pub l3: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    /// `L₁ = L₂ = L₃ = |γ|`.
    pub fn from_gamma(gamma: &[T]) -> Self {
        let a: Vec<T> = gamma.iter().map(|g| g.abs()).collect();
        Bounds {
            l1: a.clone(),
            l2: a.clone(),
            l3: a,
        }
    }
}

impl<T: Scalar> JumpModel<T> {
    pub fn finite(marks: Vec<T>, weights: Vec<T>, gamma: Vec<T>, bounds: Bounds<T>) -> Result<Self> {
        Self::build(MarkSpace::Finite, marks, weights, gamma, bounds)
    }

    /// Interval mark space discretised into `density.len()` midpoint cells; `density` holds the
    /// density of `ν` at the cell midpoints and `gamma`, `bounds` their values there.
    pub fn interval(a: T, b: T, density: Vec<T>, gamma: Vec<T>, bounds: Bounds<T>) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!("interval mark space needs a < b, got [{a}, {b}]")));
        }
        let n = density.len();
        if n == 0 {
            return Err(Error::invalid("interval mark space needs at least one cell"));
        }
        let h = (b - a) / T::from_usize_lossy(n);
        let half = T::lit(0.5);
        let marks = (0..n)
            .map(|i| a + (T::from_usize_lossy(i) + half) * h)
            .collect();
        let weights = density.iter().map(|&f| f * h).collect();
        Self::build(MarkSpace::Interval { a, b }, marks, weights, gamma, bounds)
    }

    fn build(
        space: MarkSpace<T>,
        marks: Vec<T>,
        weights: Vec<T>,
        gamma: Vec<T>,
        bounds: Bounds<T>,
    ) -> Result<Self> {
        let n = marks.len();
        if n == 0 {
            return Err(Error::invalid("mark space is empty"));
        }
        for len in [weights.len(), gamma.len(), bounds.l1.len(), bounds.l2.len(), bounds.l3.len()] {
            check_dim(n, len)?;
        }
        if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::invalid("mark weights must be positive and finite"));
        }
        if gamma.iter().chain(&marks).any(|v| !v.is_finite()) {
            return Err(Error::invalid("marks and amplitudes must be finite"));
        }
        for l in [&bounds.l1, &bounds.l2, &bounds.l3] {
            if l.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
                return Err(Error::invalid("bounding functions must be finite and nonnegative"));
            }
        }
        let total_mass = weights.iter().copied().sum();
        Ok(JumpModel {
            space,
            marks,
            weights,
            gamma,
            l1: bounds.l1,
            l2: bounds.l2,
            l3: bounds.l3,
            total_mass,
        })
    }

    pub fn space(&self) -> &MarkSpace<T> {
        &self.space
    }

    pub fn n_marks(&self) -> usize {
        self.marks.len()
    }

    pub fn marks(&self) -> &[T] {
        &self.marks
    }

    /// `ν({z_i})`, or the quadrature weight of cell `i`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn l1(&self) -> &[T] {
        &self.l1
    }

    pub fn l2(&self) -> &[T] {
        &self.l2
    }

    pub fn l3(&self) -> &[T] {
        &self.l3
    }

    /// `ν(Z)`
    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    /// `∫ f(z) ν(dz)` for a per-mark integrand.
    pub fn integrate(&self, f: impl Fn(usize) -> T) -> T {
        self.weights.iter().enumerate().map(|(i, &w)| w * f(i)).sum()
    }

    /// `∫ γ dν`
    pub fn mean_gamma(&self) -> T {
        self.integrate(|i| self.gamma[i])
    }

    /// `(∫L₁²dν, ∫L₂²dν, ∫L₃²dν)`
    pub fn bound_norms_sq(&self) -> [T; 3] {
        [&self.l1, &self.l2, &self.l3].map(|l| self.integrate(|i| l[i] * l[i]))
    }

    fn mark_sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.weights.iter().map(|w| w.to_f64_lossy()))
            .expect("weights validated positive")
    }
}

/// `ℓ(x) = x log x - x + 1` with `ℓ(0) = 1`.
pub fn ell<T: Scalar>(x: T) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::invalid(format!("ell needs x >= 0, got {x}")));
    }
    Ok(ell_unchecked(x))
}

pub(crate) fn ell_unchecked<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        x * x.ln() - x + T::one()
    }
}

/// Piecewise-constant field `ψ(t, z)` on time cells x marks.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField<T> {
    grid: TimeGrid<T>,
    n_marks: usize,
    values: Vec<T>,
    /// `(1/n, n)` when the field represents an element of a bounded control class.
    pub bounds: Option<(T, T)>,
}

impl<T: Scalar> ControlField<T> {
    /// `values[k * n_marks + m]` is the value on time cell `k` and mark `m`.
    pub fn new(grid: TimeGrid<T>, n_marks: usize, values: Vec<T>) -> Result<Self> {
        check_dim(grid.steps() * n_marks, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("control field values must be finite"));
        }
        Ok(ControlField {
            grid,
            n_marks,
            values,
            bounds: None,
        })
    }

    pub fn constant(grid: TimeGrid<T>, n_marks: usize, value: T) -> Self {
        let values = vec![value; grid.steps() * n_marks];
        ControlField {
            grid,
            n_marks,
            values,
            bounds: None,
        }
    }

    pub fn from_fn(grid: TimeGrid<T>, n_marks: usize, f: impl Fn(T, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.steps() * n_marks);
        for k in 0..grid.steps() {
            let t = grid.time(k);
            values.extend((0..n_marks).map(|m| f(t, m)));
        }
        Self::new(grid, n_marks, values)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn n_marks(&self) -> usize {
        self.n_marks
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, k: usize, m: usize) -> T {
        self.values[k * self.n_marks + m]
    }

    pub fn cell(&self, k: usize) -> &[T] {
        &self.values[k * self.n_marks..(k + 1) * self.n_marks]
    }

    /// Value at time `t` (right-continuous cells).
    pub fn at(&self, t: T, m: usize) -> T {
        self.get(self.grid.step_containing(t), m)
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v))
    }

    pub fn is_identically(&self, v: T) -> bool {
        self.values.iter().all(|&x| x == v)
    }

    pub(crate) fn ensure_nonnegative(&self) -> Result<()> {
        if self.values.iter().any(|&v| v < T::zero()) {
            return Err(Error::invalid("control field must be nonnegative"));
        }
        Ok(())
    }

    pub(crate) fn ensure_compatible(&self, model: &JumpModel<T>) -> Result<()> {
        if self.n_marks != model.n_marks() {
            return Err(Error::GridMismatch(format!(
                "control field has {} marks, model has {}",
                self.n_marks,
                model.n_marks()
            )));
        }
        Ok(())
    }

    /// Writes `t,mark_index,psi` rows, one per cell and mark.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,mark_index,psi")?;
        for k in 0..self.grid.steps() {
            for m in 0..self.n_marks {
                writeln!(w, "{},{},{}", self.grid.time(k), m, self.get(k, m))?;
            }
        }
        Ok(())
    }
}

/// `Q₂(ψ) = ∫∫ ℓ(ψ(s,z)) ν(dz) ds`, or half of it when `half` is set.
pub fn q2<T: Scalar>(psi: &ControlField<T>, model: &JumpModel<T>, half: bool) -> Result<T> {
    psi.ensure_compatible(model)?;
    psi.ensure_nonnegative()?;
    let dt = psi.grid.dt();
    let mut total = T::zero();
    for k in 0..psi.grid.steps() {
        total += psi
            .cell(k)
            .iter()
            .zip(model.weights())
            .map(|(&p, &w)| ell_unchecked(p) * w)
            .sum::<T>()
            * dt;
    }
    Ok(if half { total * T::lit(0.5) } else { total })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent<T> {
    pub time: T,
    pub mark_index: usize,
}

/// Time-sorted jump events of one particle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpLog<T> {
    pub events: Vec<JumpEvent<T>>,
}

impl<T: Scalar> JumpLog<T> {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events per grid step.
    pub fn bucket_counts(&self, grid: &TimeGrid<T>) -> Vec<usize> {
        let mut counts = vec![0; grid.steps()];
        for e in &self.events {
            counts[grid.step_containing(e.time)] += 1;
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, model: &JumpModel<T>, mut w: W) -> io::Result<()> {
        writeln!(w, "time,mark_index,mark_value")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.time, e.mark_index, model.marks()[e.mark_index])?;
        }
        Ok(())
    }
}

fn check_horizon<T: Scalar>(t_end: T, eps: T) -> Result<()> {
    if !(t_end > T::zero()) || !t_end.is_finite() {
        return Err(Error::invalid(format!("horizon must be positive, got {t_end}")));
    }
    if !(eps > T::zero()) || eps > T::one() {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// Points of `N` in the strips `r ∈ [0, r_max)` over `[0, T]`, kept when `r <= level(s, m)`.
fn sample_strips<T: Scalar>(
    model: &JumpModel<T>,
    t_end: T,
    r_max: f64,
    seed: u64,
    level: impl Fn(T, usize) -> f64,
) -> JumpLog<T> {
    let strips = r_max.ceil() as u64;
    let mean = (model.total_mass() * t_end).to_f64_lossy();
    let poisson = Poisson::new(mean).expect("positive finite intensity");
    let marks = model.mark_sampler();
    let t = t_end.to_f64_lossy();
    let mut events = Vec::new();
    for j in 0..strips {
        let mut rng = rng::stream(seed, rng::TAG_JUMPS, &[j]);
        let count = poisson.sample(&mut rng) as u64;
        for _ in 0..count {
            let time = T::lit(rng.random::<f64>() * t);
            let mark_index = marks.sample(&mut rng);
            let r = j as f64 + rng.random::<f64>();
            if r <= level(time, mark_index) {
                events.push(JumpEvent { time, mark_index });
            }
        }
    }
    events.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .expect("finite times")
            .then(a.mark_index.cmp(&b.mark_index))
    });
    JumpLog { events }
}

/// Events of the PRM with intensity `ε⁻¹ ν ⊗ Leb` on `[0, T]`.
pub fn sample_prm<T: Scalar>(model: &JumpModel<T>, t_end: T, eps: T, seed: u64) -> Result<JumpLog<T>> {
    check_horizon(t_end, eps)?;
    let level = 1.0 / eps.to_f64_lossy();
    Ok(sample_strips(model, t_end, level, seed, |_, _| level))
}

/// Events of the controlled measure `N^{ε⁻¹ψ}` by thinning. With `ψ ≡ 1` this returns exactly
/// the events of [`sample_prm`] for the same seed.
pub fn sample_controlled_prm<T: Scalar>(
    model: &JumpModel<T>,
    psi: &ControlField<T>,
    eps: T,
    seed: u64,
) -> Result<JumpLog<T>> {
    psi.ensure_compatible(model)?;
    psi.ensure_nonnegative()?;
    let t_end = psi.grid().t_end();
    check_horizon(t_end, eps)?;
    let inv_eps = 1.0 / eps.to_f64_lossy();
    let psi_max = psi.max().to_f64_lossy();
    if psi_max == 0.0 {
        return Ok(JumpLog::default());
    }
    Ok(sample_strips(model, t_end, psi_max * inv_eps, seed, |t, m| {
        psi.at(t, m).to_f64_lossy() * inv_eps
    }))
}
