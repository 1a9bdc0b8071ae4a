//! Uniform time grids and discrete vector-valued paths on them.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Uniform grid `t_k = k * dt`, `k = 0..=steps`, with `steps * dt = t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    t_end: T,
    steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t_end: T, steps: usize) -> Result<Self> {
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {t_end}")));
        }
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        Ok(TimeGrid { t_end, steps })
    }

    /// Build from a step size; `dt` must divide `t_end` to within `1e-12` relative.
    pub fn from_step(t_end: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let ratio = t_end / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > T::lit(1e-12) * ratio.max(T::one()) || steps < T::one() {
            return Err(Error::invalid(format!("dt = {dt} does not divide T = {t_end}")));
        }
        let steps = steps
            .to_usize()
            .ok_or_else(|| Error::invalid("step count overflow"))?;
        Self::new(t_end, steps)
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> T {
        self.t_end / T::from_usize_lossy(self.steps)
    }

    pub fn time(&self, k: usize) -> T {
        self.t_end * T::from_usize_lossy(k) / T::from_usize_lossy(self.steps)
    }

    /// Index `k` with `t_k < t <= t_{k+1}`; times at or before zero map to step 0.
    pub fn step_containing(&self, t: T) -> usize {
        let k = (t / self.dt()).ceil().to_usize().unwrap_or(0);
        k.saturating_sub(1).min(self.steps - 1)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.steps == other.steps && (self.t_end - other.t_end).abs() <= T::lit(1e-12) * self.t_end
    }

    pub(crate) fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "({} steps, T = {}) vs ({} steps, T = {})",
                self.steps, self.t_end, other.steps, other.t_end
            )))
        }
    }
}

/// A discrete path of `dim`-vectors, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Path<T> {
    pub fn with_capacity(dim: usize, nodes: usize) -> Self {
        Path {
            dim,
            data: Vec::with_capacity(dim * nodes),
        }
    }

    pub fn constant(point: &[T], nodes: usize) -> Self {
        let mut p = Self::with_capacity(point.len(), nodes);
        for _ in 0..nodes {
            p.push(point);
        }
        p
    }

    pub fn from_points(points: &[Vec<T>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let mut p = Self::with_capacity(dim, points.len());
        for x in points {
            crate::error::check_dim(dim, x.len())?;
            p.push(x);
        }
        Ok(p)
    }

    pub fn push(&mut self, x: &[T]) {
        debug_assert_eq!(x.len(), self.dim);
        self.data.extend_from_slice(x);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> &[T] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[T] {
        self.point(self.len() - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Increment between nodes `k` and `k + 1`.
    pub fn increment(&self, k: usize) -> Vec<T> {
        linalg::sub(self.point(k + 1), self.point(k))
    }

    pub fn sup_norm(&self) -> T {
        self.points().fold(T::zero(), |m, p| m.max(linalg::norm(p)))
    }

    /// `max_k |self_k - other_k|`.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.points()
            .zip(other.points())
            .fold(T::zero(), |m, (a, b)| m.max(linalg::dist(a, b)))
    }

    /// Sum of Euclidean norms of the increments: the discrete total variation.
    pub fn total_variation(&self) -> T {
        (0..self.len().saturating_sub(1))
            .map(|k| linalg::dist(self.point(k + 1), self.point(k)))
            .sum()
    }

    pub fn map_points(&self, mut f: impl FnMut(usize, &[T]) -> Vec<T>) -> Self {
        let mut out = Self::with_capacity(self.dim, self.len());
        for (k, p) in self.points().enumerate() {
            out.push(&f(k, p));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_from_step() {
        let g = TimeGrid::from_step(1.0, 0.001).unwrap();
        assert_eq!(g.steps(), 1000);
        assert!(TimeGrid::from_step(1.0, 0.3).is_err());
        assert_eq!(g.time(1000), 1.0);
    }

    #[test]
    fn step_lookup() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.step_containing(0.0), 0);
        assert_eq!(g.step_containing(0.25), 0);
        assert_eq!(g.step_containing(0.26), 1);
        assert_eq!(g.step_containing(1.0), 3);
    }

    #[test]
    fn path_variation() {
        let p = Path::from_points(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(p.total_variation(), 5.0);
        assert_eq!(p.sup_norm(), 5.0);
        assert_eq!(p.len(), 3);
    }
}
