//! Simulation and rare-event toolkit for multivalued McKean-Vlasov SDEs driven by Brownian
//! motion and Poisson random measures, constrained to a closed convex set `K`.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coefficients;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod hypotheses;
pub mod jumps;
pub mod linalg;
pub mod rate;
pub mod rng;
pub mod scalar;
pub mod skeleton;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub mod f64 {
    use crate::{analysis, coefficients, dynamics, geometry, grid, hypotheses, jumps, linalg, rate, skeleton};

    pub type Matrix = linalg::Matrix<f64>;
    pub type TimeGrid = grid::TimeGrid<f64>;
    pub type Path = grid::Path<f64>;
    pub type Domain = geometry::ConvexDomain<f64>;
    pub type Coefficients = coefficients::KernelCoefficients<f64>;
    pub type Measure = coefficients::EmpiricalMeasure<f64>;
    pub type Family = coefficients::PerturbationFamily<f64>;
    pub type JumpModel = jumps::JumpModel<f64>;
    pub type ControlField = jumps::ControlField<f64>;
    pub type Problem = dynamics::Problem<f64>;
    pub type PathBundle = dynamics::PathBundle<f64>;
    pub type BrownianControl = skeleton::BrownianControl<f64>;
    pub type ControlPair = skeleton::ControlPair<f64>;
    pub type Event = rate::Event<f64>;
    pub type RateQuery = rate::RateQuery<f64>;
    pub type RateResult = rate::RateResult<f64>;
    pub type MonteCarlo = analysis::MonteCarlo<f64>;
    pub type HypothesisReport = hypotheses::HypothesisReport<f64>;
}
