//! Convex constraint sets and the normal-cone operator `A = ∂I_K`.
//!
//! The constrained dynamics only ever need the resolvent of `A`, which for an indicator
//! subdifferential is the Euclidean projection onto `K`. Projections onto boxes and balls are
//! closed form; polyhedra `{x : <a_i, x> <= c_i}` go through a primal active-set solve of the
//! projection QP started from the validated strictly feasible point.
//!
//! The discrete checks in this module evaluate the Skorokhod pairing at the post-step state:
//! for the projected Euler scheme the increment `ΔK_k = X̂_{k+1} - X_{k+1}` lies in the normal
//! cone at `X_{k+1}`, so `<X_{k+1} - x, ΔK_k> >= 0` for every `x ∈ K`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::grid::Path;
use crate::linalg::{self, Matrix};
use crate::rng;
use crate::scalar::Scalar;

/// Relative tolerance for boundary membership: `1e-9 * (1 + |x|)`.
pub const MEMBERSHIP_RTOL: f64 = 1e-9;
/// KKT residual tolerance of the polyhedral projection.
pub const KKT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron<T> {
    normals: Vec<Vec<T>>,
    offsets: Vec<T>,
    interior: Vec<T>,
}

impl<T: Scalar> Polyhedron<T> {
    pub fn normals(&self) -> &[Vec<T>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn interior_point(&self) -> &[T] {
        &self.interior
    }

    fn slack(&self, i: usize, x: &[T]) -> T {
        self.offsets[i] - linalg::dot(&self.normals[i], x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape<T> {
    WholeSpace,
    /// Componentwise bounds; infinite entries are allowed.
    Box { lo: Vec<T>, hi: Vec<T> },
    Ball { center: Vec<T>, radius: T },
    Polyhedron(Polyhedron<T>),
}

/// A closed convex set with nonempty interior.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain<T> {
    dim: usize,
    shape: Shape<T>,
}

impl<T: Scalar> ConvexDomain<T> {
    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(ConvexDomain {
            dim,
            shape: Shape::WholeSpace,
        })
    }

    pub fn boxed(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || !(l < h) || l == T::infinity() || h == T::neg_infinity() {
                return Err(Error::invalid(format!(
                    "box needs lo < hi in every component (component {i}: {l} vs {h})"
                )));
            }
        }
        Ok(ConvexDomain {
            dim: lo.len(),
            shape: Shape::Box { lo, hi },
        })
    }

    pub fn ball(center: Vec<T>, radius: T) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(ConvexDomain {
            dim: center.len(),
            shape: Shape::Ball { center, radius },
        })
    }

    /// `{x : <normals[i], x> <= offsets[i]}`. `interior` must satisfy every constraint strictly.
    pub fn polyhedron(normals: Vec<Vec<T>>, offsets: Vec<T>, interior: Vec<T>) -> Result<Self> {
        let dim = interior.len();
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        check_dim(normals.len(), offsets.len())?;
        for (i, a) in normals.iter().enumerate() {
            check_dim(dim, a.len())?;
            if linalg::norm(a) == T::zero() {
                return Err(Error::invalid(format!("constraint {i} has a zero normal")));
            }
        }
        let poly = Polyhedron {
            normals,
            offsets,
            interior,
        };
        for i in 0..poly.normals.len() {
            if !(poly.slack(i, &poly.interior) > T::zero()) {
                return Err(Error::invalid(format!(
                    "supplied interior point violates or touches constraint {i}"
                )));
            }
        }
        Ok(ConvexDomain {
            dim,
            shape: Shape::Polyhedron(poly),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self.shape, Shape::WholeSpace)
    }

    fn membership_tol(x: &[T]) -> T {
        T::lit(MEMBERSHIP_RTOL) * (T::one() + linalg::norm(x))
    }

    /// Membership in `K` up to the relative tolerance `1e-9 * (1 + |x|)`.
    pub fn contains(&self, x: &[T]) -> bool {
        self.contains_within(x, Self::membership_tol(x))
    }

    pub fn contains_within(&self, x: &[T], tol: T) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.shape {
            Shape::WholeSpace => true,
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol),
            Shape::Ball { center, radius } => linalg::dist(x, center) <= *radius + tol,
            Shape::Polyhedron(p) => (0..p.normals.len())
                .all(|i| p.slack(i, x) >= -tol * linalg::norm(&p.normals[i])),
        }
    }

    /// Euclidean distance from `a` to the boundary of `K`, negative outside, `+inf` for
    /// the whole space.
    pub fn distance_to_boundary(&self, a: &[T]) -> Result<T> {
        check_dim(self.dim, a.len())?;
        Ok(match &self.shape {
            Shape::WholeSpace => T::infinity(),
            Shape::Box { lo, hi } => a
                .iter()
                .zip(lo.iter().zip(hi))
                .fold(T::infinity(), |m, (&v, (&l, &h))| m.min(v - l).min(h - v)),
            Shape::Ball { center, radius } => *radius - linalg::dist(a, center),
            Shape::Polyhedron(p) => (0..p.normals.len()).fold(T::infinity(), |m, i| {
                m.min(p.slack(i, a) / linalg::norm(&p.normals[i]))
            }),
        })
    }

    pub fn is_interior(&self, a: &[T]) -> Result<bool> {
        Ok(self.distance_to_boundary(a)? > Self::membership_tol(a))
    }

    /// `Π_K(x)`, the closest point of `K` to `x`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, x.len())?;
        let mut out = x.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    /// Projection overwriting `x`; used in the time steppers to avoid allocation.
    pub fn project_in_place(&self, x: &mut [T]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        match &self.shape {
            Shape::WholeSpace => {}
            Shape::Box { lo, hi } => {
                for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
                    *v = v.max(l).min(h);
                }
            }
            Shape::Ball { center, radius } => {
                let d = linalg::dist(x, center);
                if d > *radius {
                    let s = *radius / d;
                    for (v, &c) in x.iter_mut().zip(center) {
                        *v = c + (*v - c) * s;
                    }
                }
            }
            Shape::Polyhedron(p) => {
                let w = project_polyhedron(p, x)?;
                x.copy_from_slice(&w);
            }
        }
        Ok(())
    }

    /// `(I + λ ∂I_K)^{-1}(x)`. For an indicator subdifferential this is the projection for
    /// every `λ > 0`.
    pub fn resolvent(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        if !(lambda > T::zero()) {
            return Err(Error::invalid(format!("resolvent needs lambda > 0, got {lambda}")));
        }
        self.project(x)
    }

    /// Whether `y` belongs to the exterior normal cone `∂I_K(x)` (up to `tol`).
    pub fn in_normal_cone(&self, x: &[T], y: &[T], tol: T) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        if !self.contains(x) {
            return Ok(false);
        }
        // y ∈ N_K(x) iff Π_K(x + y) = x
        let xy: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a + b).collect();
        let p = self.project(&xy)?;
        Ok(linalg::dist(&p, x) <= tol * (T::one() + linalg::norm(y)))
    }

    /// A point strictly inside `K` drawn from a spread-out distribution. Unbounded directions
    /// are sampled at unit scale around the finite bounds.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let n = self.dim;
        match &self.shape {
            Shape::WholeSpace => (0..n).map(|_| T::lit(gauss(rng) * 2.0)).collect(),
            Shape::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| {
                    let u = T::lit(rng.random_range(0.02..0.98));
                    match (l.is_finite(), h.is_finite()) {
                        (true, true) => l + (h - l) * u,
                        (true, false) => l + T::lit(-2.0 * (1.0 - u.to_f64_lossy()).ln()) + T::lit(1e-3),
                        (false, true) => h - T::lit(-2.0 * (1.0 - u.to_f64_lossy()).ln()) - T::lit(1e-3),
                        (false, false) => T::lit(gauss(rng) * 2.0),
                    }
                })
                .collect(),
            Shape::Ball { center, radius } => {
                let dir = unit_vector::<T, R>(n, rng);
                let r = *radius * T::lit(0.98 * rng.random::<f64>().powf(1.0 / n as f64));
                center.iter().zip(&dir).map(|(&c, &u)| c + r * u).collect()
            }
            Shape::Polyhedron(p) => {
                // Shrink a projected far point towards the interior point.
                let far: Vec<T> = p
                    .interior
                    .iter()
                    .map(|&c| c + T::lit(gauss(rng) * 3.0))
                    .collect();
                let q = project_polyhedron(p, &far).unwrap_or_else(|_| p.interior.clone());
                let s = T::lit(rng.random_range(0.0..0.97));
                p.interior
                    .iter()
                    .zip(&q)
                    .map(|(&c, &b)| c + (b - c) * s)
                    .collect()
            }
        }
    }

    /// Draw `n` elements of the graph of `∂I_K`: interior points paired with `0`, and boundary
    /// points paired with a nonnegative combination of the active outward normals.
    pub fn sample_graph(&self, n: usize, seed: u64) -> Result<Vec<GraphSample<T>>> {
        if n == 0 {
            return Err(Error::invalid("sample_graph needs n >= 1"));
        }
        let mut rng = rng::stream(seed, rng::TAG_SAMPLE, &[0]);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let interior = self.is_whole_space() || rng.random_bool(0.4);
            if interior {
                let x = self.sample_interior(&mut rng);
                out.push(GraphSample {
                    y: vec![T::zero(); self.dim],
                    x,
                });
            } else {
                out.push(self.sample_boundary_pair(&mut rng)?);
            }
        }
        Ok(out)
    }

    fn sample_boundary_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GraphSample<T>> {
        let n = self.dim;
        match &self.shape {
            Shape::WholeSpace => unreachable!("whole space has no boundary"),
            Shape::Ball { center, radius } => {
                let u = unit_vector::<T, R>(n, rng);
                let t = T::lit(rng.random_range(0.0..2.0));
                let x = center.iter().zip(&u).map(|(&c, &v)| c + *radius * v).collect();
                let y = u.iter().map(|&v| t * v).collect();
                Ok(GraphSample { x, y })
            }
            Shape::Box { lo, hi } => {
                let mut x = self.sample_interior(rng);
                let mut y = vec![T::zero(); n];
                let faces: Vec<(usize, bool)> = (0..n)
                    .flat_map(|i| [(i, false), (i, true)])
                    .filter(|&(i, upper)| if upper { hi[i].is_finite() } else { lo[i].is_finite() })
                    .collect();
                if faces.is_empty() {
                    return Ok(GraphSample { x, y });
                }
                let first = rng.random_range(0..faces.len());
                for (j, &(i, upper)) in faces.iter().enumerate() {
                    if j != first && !rng.random_bool(0.3) {
                        continue;
                    }
                    if y[i] != T::zero() {
                        continue;
                    }
                    let t = T::lit(rng.random_range(0.05..2.0));
                    if upper {
                        x[i] = hi[i];
                        y[i] = t;
                    } else {
                        x[i] = lo[i];
                        y[i] = -t;
                    }
                }
                Ok(GraphSample { x, y })
            }
            Shape::Polyhedron(p) => {
                let far: Vec<T> = p
                    .interior
                    .iter()
                    .map(|&c| c + T::lit(gauss(rng) * 4.0))
                    .collect();
                let x = project_polyhedron(p, &far)?;
                let tol = T::lit(1e-9) * (T::one() + linalg::norm(&x));
                let mut y = vec![T::zero(); n];
                for i in 0..p.normals.len() {
                    if p.slack(i, &x).abs() <= tol * linalg::norm(&p.normals[i]) {
                        let t = T::lit(rng.random_range(0.05..2.0));
                        linalg::axpy(t, &p.normals[i], &mut y);
                    }
                }
                Ok(GraphSample { x, y })
            }
        }
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_vector<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
        let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if s > 1e-8 {
            return v.into_iter().map(|a| T::lit(a / s)).collect();
        }
    }
}

/// Primal active-set solve of `min ½|w - x|²` subject to `<a_i, w> <= c_i`, started from the
/// strictly feasible interior point. Ties when adding or dropping constraints go to the lowest
/// index, which rules out cycling.
fn project_polyhedron<T: Scalar>(p: &Polyhedron<T>, x: &[T]) -> Result<Vec<T>> {
    let m = p.normals.len();
    let dim = x.len();
    let feas_tol = |w: &[T]| T::lit(KKT_TOL) * (T::one() + linalg::norm(w));
    if (0..m).all(|i| p.slack(i, x) >= T::zero()) {
        return Ok(x.to_vec());
    }
    let mut w = p.interior.clone();
    let mut active: Vec<usize> = Vec::new();
    let max_iter = 20 * (m + dim) + 100;
    for _ in 0..max_iter {
        let g = linalg::sub(x, &w);
        let lambda = active_multipliers(p, &active, &g)?;
        // step p = g - A_Wᵀ λ is the projection of g on the null space of the working set
        let mut step = g.clone();
        for (k, &i) in active.iter().enumerate() {
            linalg::axpy(-lambda[k], &p.normals[i], &mut step);
        }
        let step_norm = linalg::norm(&step);
        if step_norm <= feas_tol(&w) {
            // stationary on the working set: check multiplier signs
            let drop = active
                .iter()
                .enumerate()
                .filter(|&(k, _)| lambda[k] < -T::lit(KKT_TOL))
                .min_by_key(|&(_, &i)| i)
                .map(|(k, _)| k);
            match drop {
                None => return Ok(w),
                Some(k) => {
                    active.remove(k);
                    continue;
                }
            }
        }
        let mut alpha = T::one();
        let mut blocking: Option<usize> = None;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let ap = linalg::dot(&p.normals[i], &step);
            if ap > T::zero() {
                let a = (p.slack(i, &w).max(T::zero())) / ap;
                if a < alpha || (a == alpha && blocking.is_some_and(|b| i < b)) {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        linalg::axpy(alpha, &step, &mut w);
        if let Some(i) = blocking {
            active.push(i);
            active.sort_unstable();
        }
    }
    Err(Error::Numerical(
        "polyhedral projection did not converge".to_string(),
    ))
}

/// Least-squares multipliers `λ` with `A_W A_Wᵀ λ = A_W g`.
fn active_multipliers<T: Scalar>(p: &Polyhedron<T>, active: &[usize], g: &[T]) -> Result<Vec<T>> {
    let k = active.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut gram = Matrix::zeros(k, k);
    let mut rhs = vec![T::zero(); k];
    for (r, &i) in active.iter().enumerate() {
        rhs[r] = linalg::dot(&p.normals[i], g);
        for (c, &j) in active.iter().enumerate() {
            gram[(r, c)] = linalg::dot(&p.normals[i], &p.normals[j]);
        }
    }
    gram.solve(&rhs, T::lit(1e-13))
        .ok_or_else(|| Error::Numerical("degenerate active set in projection".to_string()))
}

/// KKT residual of a claimed projection `w = Π_K(x)`: the larger of primal infeasibility and
/// the distance of `x - w` from the cone spanned by active normals (zero for exact answers).
pub fn projection_kkt_residual<T: Scalar>(domain: &ConvexDomain<T>, x: &[T], w: &[T]) -> Result<T> {
    check_dim(domain.dim(), x.len())?;
    check_dim(domain.dim(), w.len())?;
    let infeas = match &domain.shape {
        Shape::WholeSpace => T::zero(),
        Shape::Box { lo, hi } => w
            .iter()
            .zip(lo.iter().zip(hi))
            .fold(T::zero(), |m, (&v, (&l, &h))| m.max(l - v).max(v - h)),
        Shape::Ball { center, radius } => (linalg::dist(w, center) - *radius).max(T::zero()),
        Shape::Polyhedron(p) => (0..p.normals.len())
            .fold(T::zero(), |m, i| m.max(-p.slack(i, w) / linalg::norm(&p.normals[i]))),
    };
    // stationarity: y = x - w must lie in N_K(w); test via Π_K(w + y) = w
    let y = linalg::sub(x, w);
    let back: Vec<T> = w.iter().zip(&y).map(|(&a, &b)| a + b).collect();
    let reproj = domain.project(&back)?;
    Ok(infeas.max(linalg::dist(&reproj, w)))
}

/// An element `(x, y)` of the graph of `∂I_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

/// Default discrete tolerance `10 * dt * (1 + max|X|)`.
pub fn default_tolerance<T: Scalar>(dt: T, path_x: &Path<T>) -> T {
    T::lit(10.0) * dt * (T::one() + path_x.sup_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport<T> {
    /// One entry per (graph sample or partner path, step), in sample-major order.
    pub inner_products: Vec<T>,
    pub min_inner_product: T,
    pub tol: T,
    pub pass: bool,
}

impl<T: Scalar> MonotonicityReport<T> {
    fn from_products(inner_products: Vec<T>, tol: T) -> Self {
        let min = inner_products
            .iter()
            .fold(T::infinity(), |m, &v| m.min(v));
        let min = if inner_products.is_empty() { T::zero() } else { min };
        MonotonicityReport {
            pass: min >= -tol,
            min_inner_product: min,
            inner_products,
            tol,
        }
    }
}

/// Discrete form of `<X_t - x, dK_t - y dt> >= 0` for every supplied graph element `(x, y)`.
pub fn check_pair_monotonicity<T: Scalar>(
    path_x: &Path<T>,
    path_k: &Path<T>,
    dt: T,
    graph: &[GraphSample<T>],
    tol: T,
) -> Result<MonotonicityReport<T>> {
    ensure_same_shape(path_x, path_k)?;
    let steps = path_x.len() - 1;
    let mut products = Vec::with_capacity(graph.len() * steps);
    for g in graph {
        check_dim(path_x.dim(), g.x.len())?;
        for k in 0..steps {
            let dk = path_k.increment(k);
            let xk = path_x.point(k + 1);
            let s: T = (0..xk.len())
                .map(|i| (xk[i] - g.x[i]) * (dk[i] - g.y[i] * dt))
                .sum();
            products.push(s);
        }
    }
    Ok(MonotonicityReport::from_products(products, tol))
}

/// Discrete form of `<X_t - X'_t, dK_t - dK'_t> >= 0` for two solution pairs on one grid.
pub fn check_solution_pair_monotonicity<T: Scalar>(
    path_x: &Path<T>,
    path_k: &Path<T>,
    other_x: &Path<T>,
    other_k: &Path<T>,
    tol: T,
) -> Result<MonotonicityReport<T>> {
    ensure_same_shape(path_x, path_k)?;
    ensure_same_shape(other_x, other_k)?;
    ensure_same_shape(path_x, other_x)?;
    let steps = path_x.len() - 1;
    let products = (0..steps)
        .map(|k| {
            let dx = linalg::sub(path_x.point(k + 1), other_x.point(k + 1));
            let dk = linalg::sub(&path_k.increment(k), &other_k.increment(k));
            linalg::dot(&dx, &dk)
        })
        .collect();
    Ok(MonotonicityReport::from_products(products, tol))
}

fn ensure_same_shape<T: Scalar>(a: &Path<T>, b: &Path<T>) -> Result<()> {
    if a.len() != b.len() || a.dim() != b.dim() {
        return Err(Error::GridMismatch(format!(
            "paths have {}x{} and {}x{} nodes x dims",
            a.len(),
            a.dim(),
            b.len(),
            b.dim()
        )));
    }
    if a.len() < 2 {
        return Err(Error::GridMismatch("paths need at least two nodes".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationReport<T> {
    /// `Σ <X_{k+1} - a, ΔK_k>` over the interval.
    pub lhs: T,
    /// `r |K| - μ Σ |X_{k+1} - a| dt - r μ (t - s)`.
    pub rhs: T,
    pub total_variation: T,
    pub tol: T,
    pub pass: bool,
}

/// Discrete check of `∫_s^t <X - a, dK> >= r |K|_s^t - μ ∫_s^t |X - a| dv - r μ (t - s)` on
/// the node range `[start, end]`. `r` may not exceed the distance from `a` to the boundary.
#[allow(clippy::too_many_arguments)]
pub fn check_variation_bound<T: Scalar>(
    domain: &ConvexDomain<T>,
    path_x: &Path<T>,
    path_k: &Path<T>,
    dt: T,
    a: &[T],
    r: T,
    mu: T,
    (start, end): (usize, usize),
    tol: T,
) -> Result<VariationReport<T>> {
    ensure_same_shape(path_x, path_k)?;
    check_dim(domain.dim(), a.len())?;
    if !(r > T::zero()) || !(mu > T::zero()) {
        return Err(Error::invalid("variation bound needs r > 0 and mu > 0"));
    }
    if start > end || end >= path_x.len() {
        return Err(Error::invalid(format!(
            "interval [{start}, {end}] outside path of {} nodes",
            path_x.len()
        )));
    }
    let depth = domain.distance_to_boundary(a)?;
    if !domain.is_interior(a)? {
        return Err(Error::OutsideDomain("reference point is not interior".into()));
    }
    if r > depth {
        return Err(Error::invalid(format!(
            "r = {r} exceeds the distance {depth} from the reference point to the boundary"
        )));
    }
    let mut lhs = T::zero();
    let mut variation = T::zero();
    let mut spread = T::zero();
    for k in start..end {
        let dk = path_k.increment(k);
        let xa = linalg::sub(path_x.point(k + 1), a);
        lhs += linalg::dot(&xa, &dk);
        variation += linalg::norm(&dk);
        spread += linalg::norm(&xa) * dt;
    }
    let span = T::from_usize_lossy(end - start) * dt;
    let rhs = r * variation - mu * spread - r * mu * span;
    Ok(VariationReport {
        pass: lhs >= rhs - tol,
        lhs,
        rhs,
        total_variation: variation,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn ball_projection_scales_radially() {
        let k = ConvexDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(k.project(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(k.project(&[0.3, 0.1]).unwrap(), vec![0.3, 0.1]);
    }

    #[test]
    fn box_projection_clamps() {
        let k = ConvexDomain::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(k.project(&[1.5, -0.5]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn halfplane_projection() {
        // min |x - w|² s.t. w1 + w2 <= 1 at x = (1,1): KKT gives w = x - λ(1,1), 2 - 2λ = 1.
        let k = ConvexDomain::polyhedron(vec![vec![1.0, 1.0]], vec![1.0], vec![0.0, 0.0]).unwrap();
        let w = k.project(&[1.0, 1.0]).unwrap();
        assert!(close(&w, &[0.5, 0.5], 1e-12), "{w:?}");
    }

    #[test]
    fn polyhedron_corner_projection() {
        // unit square as a polyhedron; outside the corner projects onto the corner
        let k = ConvexDomain::polyhedron(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let w = k.project(&[3.0, 2.0]).unwrap();
        assert!(close(&w, &[1.0, 1.0], 1e-12));
        let w = k.project(&[0.5, -2.0]).unwrap();
        assert!(close(&w, &[0.5, 0.0], 1e-12));
    }

    #[test]
    fn resolvent_examples() {
        let ball = ConvexDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        for lambda in [0.01, 1.0, 100.0] {
            assert_eq!(ball.resolvent(lambda, &[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        }
        let whole = ConvexDomain::<f64>::whole_space(2).unwrap();
        assert_eq!(whole.resolvent(0.01, &[3.0, -7.0]).unwrap(), vec![3.0, -7.0]);
        let unit = ConvexDomain::boxed(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(unit.resolvent(1.0, &[-3.0]).unwrap(), vec![0.0]);
        assert!(unit.resolvent(0.0, &[0.5]).is_err());
        assert!(unit.resolvent(-1.0, &[0.5]).is_err());
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(ConvexDomain::boxed(vec![1.0], vec![1.0]).is_err());
        assert!(ConvexDomain::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexDomain::polyhedron(vec![vec![1.0]], vec![0.0], vec![0.0]).is_err());
        assert!(ConvexDomain::polyhedron(vec![vec![1.0, 0.0]], vec![1.0], vec![0.0]).is_err());
        let k = ConvexDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            k.project(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ball_graph_boundary_normal() {
        let k = ConvexDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(k.in_normal_cone(&[1.0, 0.0], &[0.7, 0.0], 1e-12).unwrap());
        assert!(!k.in_normal_cone(&[1.0, 0.0], &[0.0, 0.7], 1e-12).unwrap());
        assert!(k.in_normal_cone(&[0.2, 0.1], &[0.0, 0.0], 1e-12).unwrap());
        assert!(!k.in_normal_cone(&[0.2, 0.1], &[0.1, 0.0], 1e-12).unwrap());
    }

    #[test]
    fn sampled_graph_is_monotone_and_in_graph() {
        let domains = vec![
            ConvexDomain::ball(vec![0.5, -0.5], 2.0).unwrap(),
            ConvexDomain::boxed(vec![0.0, -1.0], vec![1.0, f64::INFINITY]).unwrap(),
            ConvexDomain::polyhedron(
                vec![vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
                vec![1.0, 0.0, 0.0],
                vec![0.2, 0.2],
            )
            .unwrap(),
            ConvexDomain::whole_space(2).unwrap(),
        ];
        for k in domains {
            let g = k.sample_graph(200, 11).unwrap();
            assert_eq!(g.len(), 200);
            for s in &g {
                assert!(k.contains(&s.x));
                assert!(k.in_normal_cone(&s.x, &s.y, 1e-9).unwrap());
                if k.is_interior(&s.x).unwrap() {
                    assert!(s.y.iter().all(|&v| v == 0.0));
                }
            }
            for a in &g {
                for b in &g {
                    let ip = linalg::dot(&linalg::sub(&a.x, &b.x), &linalg::sub(&a.y, &b.y));
                    assert!(ip >= -1e-12, "{ip}");
                }
            }
        }
        assert!(ConvexDomain::<f64>::whole_space(1).unwrap().sample_graph(0, 1).is_err());
    }

    #[test]
    fn zero_correction_passes_trivially() {
        let x = Path::from_points(&[vec![0.0], vec![1.0], vec![-2.0]]).unwrap();
        let k = Path::constant(&[0.0], 3);
        let g = vec![GraphSample { x: vec![5.0], y: vec![0.0] }];
        let r = check_pair_monotonicity(&x, &k, 0.1, &g, 0.0).unwrap();
        assert!(r.pass);
        assert!(r.inner_products.iter().all(|&v| v == 0.0));
        let dom = ConvexDomain::whole_space(1).unwrap();
        let v = check_variation_bound(&dom, &x, &k, 0.1, &[0.0], 1.0, 1.0, (0, 2), 0.0).unwrap();
        assert_eq!(v.lhs, 0.0);
        assert!(v.pass);
        let v = check_variation_bound(&dom, &x, &k, 0.1, &[0.0], 1.0, 1.0, (1, 1), 0.0).unwrap();
        assert_eq!((v.lhs, v.rhs), (0.0, 0.0));
        assert!(v.pass);
    }

    #[test]
    fn reflected_walk_on_half_line() {
        // X_{k+1} = max(X_k + step, 0), ΔK = X̂ - X_{k+1} <= 0 (outward normal of [0, ∞) is -1).
        let steps = [-0.3, -0.4, 0.2, -0.6, 0.1, -0.05];
        let mut xs = vec![vec![0.5]];
        let mut ks = vec![vec![0.0]];
        for s in steps {
            let prev = xs.last().unwrap()[0];
            let hat: f64 = prev + s;
            let next = hat.max(0.0);
            let kprev = ks.last().unwrap()[0];
            xs.push(vec![next]);
            ks.push(vec![kprev + (hat - next)]);
        }
        let x = Path::from_points(&xs).unwrap();
        let k = Path::from_points(&ks).unwrap();
        assert!(k.total_variation() > 0.0);
        let g = vec![GraphSample { x: vec![1.0], y: vec![0.0] }];
        let tol = default_tolerance(0.1, &x);
        assert!(check_pair_monotonicity(&x, &k, 0.1, &g, tol).unwrap().pass);
        let dom = ConvexDomain::boxed(vec![0.0], vec![f64::INFINITY]).unwrap();
        let v = check_variation_bound(&dom, &x, &k, 0.1, &[1.0], 0.5, 1.0, (0, 6), tol).unwrap();
        assert!(v.pass, "{v:?}");
        assert!(v.lhs >= 0.5 * v.total_variation - 1e-12);
        assert!(check_variation_bound(&dom, &x, &k, 0.1, &[1.0], 2.0, 1.0, (0, 6), tol).is_err());
        assert!(check_variation_bound(&dom, &x, &k, 0.1, &[-1.0], 0.5, 1.0, (0, 6), tol).is_err());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let x = Path::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        let k = Path::constant(&[0.0], 3);
        assert!(matches!(
            check_pair_monotonicity(&x, &k, 0.1, &[], 0.0),
            Err(Error::GridMismatch(_))
        ));
    }
}
