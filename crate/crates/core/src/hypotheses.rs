//! Sampling-based falsification of the structural hypotheses on the coefficients.
//!
//! Every check draws states from the domain and small discrete measures supported in it, and
//! reports the worst sample. A pass means no counterexample was found.

use std::fmt::Write as _;
use std::io::{self, Write};

use rand::Rng;

use crate::analysis::wasserstein2;
use crate::coefficients::{
    eval_jump_mean_field, eval_mean_field, grad_b, Coefficient, EmpiricalMeasure, MeanFieldValue,
    PerturbationRate,
};
use crate::dynamics::{solve_limit, ModerateScale, Problem};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{self, Matrix};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSettings<T> {
    pub samples: usize,
    pub seed: u64,
    /// Particles per sampled measure.
    pub atoms: usize,
    /// Grid for the limit path used by the derivative conditions.
    pub grid: TimeGrid<T>,
    /// `λ(ε) = ε^θ` in the moderate-deviation ratio check.
    pub scale: ModerateScale<T>,
    /// `L'` and `q'` in the local Lipschitz bound on `∇b`.
    pub c0_constant: T,
    pub c0_power: T,
}

impl HypothesisSettings<f64> {
    pub fn new(samples: usize, seed: u64, grid: TimeGrid<f64>) -> Self {
        HypothesisSettings {
            samples,
            seed,
            atoms: 4,
            grid,
            scale: ModerateScale::new(0.25).expect("valid theta"),
            c0_constant: 1.0,
            c0_power: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisRow<T> {
    pub hypothesis: &'static str,
    pub pass: bool,
    /// Largest `lhs - rhs` seen; nonpositive when the inequality held everywhere.
    pub worst_violation: T,
    pub samples: usize,
    pub witness: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport<T> {
    pub rows: Vec<HypothesisRow<T>>,
}

impl<T: Scalar> HypothesisReport<T> {
    pub fn row(&self, name: &str) -> Option<&HypothesisRow<T>> {
        self.rows.iter().find(|r| r.hypothesis == name)
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "hypothesis,pass,worst_violation,samples,witness,note")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.hypothesis, r.pass, r.worst_violation, r.samples, r.witness, r.note
            )?;
        }
        Ok(())
    }
}

/// Relative slack allowed before a sample counts as a violation.
const REL_TOL: f64 = 1e-9;

/// Running maximum of `lhs - rhs` for one inequality.
struct Worst<T> {
    name: &'static str,
    violation: T,
    rel: T,
    witness: String,
    samples: usize,
    note: String,
}

impl<T: Scalar> Worst<T> {
    fn new(name: &'static str) -> Self {
        Worst {
            name,
            violation: T::neg_infinity(),
            rel: T::neg_infinity(),
            witness: String::new(),
            samples: 0,
            note: String::new(),
        }
    }

    fn record(&mut self, lhs: T, rhs: T, witness: impl FnOnce() -> String) {
        let diff = lhs - rhs;
        let rel = diff / (T::one() + lhs.abs() + rhs.abs());
        if rel > self.rel || rel.is_nan() {
            self.rel = if rel.is_nan() { T::infinity() } else { rel };
            self.violation = if diff.is_nan() { T::infinity() } else { diff };
            self.witness = witness();
        }
    }

    fn finish(self) -> HypothesisRow<T> {
        HypothesisRow {
            hypothesis: self.name,
            pass: self.rel <= T::lit(REL_TOL),
            worst_violation: self.violation,
            samples: self.samples,
            witness: self.witness,
            note: self.note,
        }
    }
}

fn fmt_vec<T: Scalar>(v: &[T]) -> String {
    let mut s = String::from("(");
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x}");
    }
    s.push(')');
    s
}

fn drift<T: Scalar>(p: &Problem<T>, x: &[T], mu: &EmpiricalMeasure<T>) -> Result<Vec<T>> {
    match eval_mean_field(&p.coeffs, Coefficient::Drift, x, mu)? {
        MeanFieldValue::Vector(v) => Ok(v),
        MeanFieldValue::Matrix(_) => unreachable!("drift is vector valued"),
    }
}

fn diffusion<T: Scalar>(p: &Problem<T>, x: &[T], mu: &EmpiricalMeasure<T>) -> Result<Matrix<T>> {
    match eval_mean_field(&p.coeffs, Coefficient::Diffusion, x, mu)? {
        MeanFieldValue::Matrix(m) => Ok(m),
        MeanFieldValue::Vector(_) => unreachable!("diffusion is matrix valued"),
    }
}

/// Per-mark `G(x, μ, z)`.
fn jumps_at<T: Scalar>(p: &Problem<T>, x: &[T], mu: &EmpiricalMeasure<T>) -> Result<Vec<Vec<T>>> {
    match &p.jumps {
        None => Ok(Vec::new()),
        Some(model) => model
            .gamma()
            .iter()
            .map(|&g| eval_jump_mean_field(&p.coeffs, x, mu, g))
            .collect(),
    }
}

struct Sample<T> {
    x: Vec<T>,
    xp: Vec<T>,
    mu: EmpiricalMeasure<T>,
    mup: EmpiricalMeasure<T>,
}

fn draw<T: Scalar>(p: &Problem<T>, atoms: usize, seed: u64, i: usize) -> Result<Sample<T>> {
    let mut r = rng::stream(seed, rng::TAG_SAMPLE, &[i as u64]);
    let x = p.domain.sample_interior(&mut r);
    // every other sample puts x' close to x, where a non-Lipschitz modulus is tightest
    let xp = if i % 2 == 1 {
        let s = T::lit(10f64.powf(-r.random_range(1.0..6.0)));
        let mut y: Vec<T> = x.iter().map(|&a| a + s * T::lit(r.random_range(-1.0..1.0))).collect();
        p.domain.project_in_place(&mut y)?;
        y
    } else {
        p.domain.sample_interior(&mut r)
    };
    let measure = |r: &mut rng::StreamRng| {
        let pts: Vec<Vec<T>> = (0..atoms).map(|_| p.domain.sample_interior(r)).collect();
        EmpiricalMeasure::from_points(&pts)
    };
    let mu = measure(&mut r)?;
    let mup = if i.is_multiple_of(3) { mu.clone() } else { measure(&mut r)? };
    Ok(Sample { x, xp, mu, mup })
}

fn rate_vanishes<T: Scalar>(rate: &PerturbationRate<T>) -> bool {
    rate.eval(T::lit(1e-12)) <= T::lit(1e-6) * (T::one() + rate.eval(T::one()))
}

/// Samples the hypotheses on the coefficients, the jump kernel, the domain and the perturbation
/// family of `problem`. The constant `L` of the Lipschitz-type conditions is the growth constant
/// of the coefficients. Failures are reported in the rows, never raised.
pub fn check_hypotheses<T: Scalar>(
    problem: &Problem<T>,
    settings: &HypothesisSettings<T>,
) -> Result<HypothesisReport<T>> {
    if settings.samples == 0 || settings.atoms == 0 {
        return Err(Error::invalid("hypothesis checks need at least one sample and one atom"));
    }
    let c = &problem.coeffs;
    let kappa = c.modulus;
    let big_l = c.growth;
    let weights: Vec<T> = problem.jumps.as_ref().map_or_else(Vec::new, |m| m.weights().to_vec());
    let l1: Vec<T> = problem.jumps.as_ref().map_or_else(Vec::new, |m| m.l1().to_vec());
    let l2: Vec<T> = problem.jumps.as_ref().map_or_else(Vec::new, |m| m.l2().to_vec());

    let mut h2 = Worst::new("H2");
    let mut h2p = Worst::new("H2'");
    let mut h3 = Worst::new("H3");
    let mut h4 = Worst::new("H4");
    let mut h6 = Worst::new("H6");
    let mut h6p = Worst::new("H6'");
    let mut conservative = false;

    for i in 0..settings.samples {
        let s = draw(problem, settings.atoms, settings.seed, i)?;
        let w = wasserstein2(&s.mu, &s.mup)?;
        conservative |= w.bound_only;
        let w2 = w.value;
        let dx = linalg::sub(&s.x, &s.xp);
        let dx2 = linalg::norm_sq(&dx);
        let kap = kappa.eval(dx2) + kappa.eval(w2 * w2);
        let wit = || {
            format!(
                "x={} x'={} w2={}",
                fmt_vec(&s.x),
                fmt_vec(&s.xp),
                w2
            )
        };

        let b = drift(problem, &s.x, &s.mu)?;
        let bp = drift(problem, &s.xp, &s.mup)?;
        let b_same = drift(problem, &s.xp, &s.mu)?;
        let b_xmup = drift(problem, &s.x, &s.mup)?;
        let sig = diffusion(problem, &s.x, &s.mu)?;
        let sigp = diffusion(problem, &s.xp, &s.mup)?;
        let mut dsig = sig.clone();
        dsig.add_assign_scaled(-T::one(), &sigp);
        let dsig2 = dsig.frobenius_norm().powi(2);
        let g = jumps_at(problem, &s.x, &s.mu)?;
        let gp = jumps_at(problem, &s.xp, &s.mup)?;
        let dg: Vec<T> = g.iter().zip(&gp).map(|(a, b)| linalg::dist(a, b)).collect();
        let int_dg2: T = dg.iter().zip(&weights).map(|(&d, &w)| w * d * d).sum();

        h2.record(linalg::dot(&dx, &linalg::sub(&b, &bp)), kap, wit);
        h2.record(dsig2.max(int_dg2), kap, wit);

        h2p.record(
            linalg::dot(&dx, &linalg::sub(&b, &b_same)),
            big_l * dx2,
            wit,
        );
        h2p.record(linalg::dist(&b, &b_xmup), big_l * w2, wit);
        h2p.record(dsig2.max(int_dg2), big_l * (dx2 + w2 * w2), wit);

        for (m, &d) in dg.iter().enumerate() {
            let mwit = || format!("{} mark={m}", wit());
            h6.record(d * d, l1[m] * l1[m] * kap, mwit);
            h6p.record(d, l1[m] * (dx2.sqrt() + w2), mwit);
        }

        // kernel-level growth: the measures are single atoms at y
        let y = s.mu.particle(0);
        let dy = EmpiricalMeasure::dirac(y);
        let rhs = big_l * (T::one() + linalg::norm_sq(&s.x) + linalg::norm_sq(y));
        let bt = drift(problem, &s.x, &dy)?;
        let st = diffusion(problem, &s.x, &dy)?;
        let gt = jumps_at(problem, &s.x, &dy)?;
        let int_g2: T = gt.iter().zip(&weights).map(|(v, &w)| w * linalg::norm_sq(v)).sum();
        let grow = linalg::norm_sq(&bt).max(st.frobenius_norm().powi(2)).max(int_g2);
        h3.record(grow, rhs, || format!("x={} y={}", fmt_vec(&s.x), fmt_vec(y)));
        h3.samples += 1;

        for (m, v) in gt.iter().enumerate() {
            let shifted: Vec<T> = s.x.iter().zip(v).map(|(&a, &b)| a + b).collect();
            let proj = problem.domain.project(&shifted)?;
            let dist = linalg::dist(&shifted, &proj);
            h4.record(dist, T::zero(), || {
                format!("x={} y={} mark={m} x+G={}", fmt_vec(&s.x), fmt_vec(y), fmt_vec(&shifted))
            });
        }
        h4.samples += 1;
        for row in [&mut h2, &mut h2p, &mut h6, &mut h6p] {
            row.samples += 1;
        }
    }

    if problem.jumps.is_none() || c.jump.is_zero() {
        for row in [&mut h4, &mut h6, &mut h6p] {
            row.violation = T::zero();
            row.rel = T::zero();
            row.note = "no jump kernel".into();
        }
    }
    let zero = vec![T::zero(); c.dim()];
    let at_origin = jumps_at(problem, &zero, &EmpiricalMeasure::dirac(&zero))?;
    for (m, v) in at_origin.iter().enumerate() {
        let wit = || format!("|G(0 delta_0 z)| mark={m}");
        h6.record(linalg::norm(v), l2[m], wit);
        h6p.record(linalg::norm(v), l2[m], wit);
    }
    if let Some(model) = &problem.jumps {
        let [a, b, c3] = model.bound_norms_sq();
        let note = format!("int L1^2={a} int L2^2={b} int L3^2={c3}");
        h6.note = note.clone();
        h6p.note = note;
    }
    let rho_g = rate_vanishes(&problem.family.rho_g);
    if !rho_g {
        h6.record(T::one(), T::zero(), || "rho_G does not vanish".into());
        h6p.record(T::one(), T::zero(), || "rho_G does not vanish".into());
    }
    if conservative {
        h2.note = "W2 replaced by the paired-coupling upper bound".into();
        h2p.note = h2.note.clone();
    }

    let mut h5 = Worst::new("H5");
    h5.samples = 1;
    for (name, rate) in [("rho_b", &problem.family.rho_b), ("rho_sigma", &problem.family.rho_sigma)] {
        let v = rate.eval(T::lit(1e-12));
        h5.record(
            if rate_vanishes(rate) { T::zero() } else { v },
            T::zero(),
            || format!("{name}(1e-12)={v}"),
        );
    }

    // derivative conditions along the limit path, with μ = δ_{X⁰_t}
    let limit = solve_limit(problem, settings.grid)?;
    let path = &limit.states[0];
    let dt = settings.grid.dt();
    let mut c1_integral = T::zero();
    let mut prev = None;
    for k in 0..path.len() {
        let x = path.point(k);
        let n2 = grad_b(c, x, &EmpiricalMeasure::dirac(x))?.frobenius_norm().powi(2);
        if let Some(p) = prev {
            c1_integral += T::lit(0.5) * dt * (p + n2);
        }
        prev = Some(n2);
    }
    let mut c1 = Worst::new("C1");
    c1.samples = path.len();
    c1.violation = T::zero();
    c1.rel = if c1_integral.is_finite() { T::zero() } else { T::infinity() };
    c1.witness = format!("integral={c1_integral}");

    let mut c0 = Worst::new("C0");
    for i in 0..settings.samples {
        let s = draw(problem, 1, settings.seed ^ 0xC0, i)?;
        let k = (i * 7919) % path.len();
        let law = EmpiricalMeasure::dirac(path.point(k));
        let mut d = grad_b(c, &s.x, &law)?;
        d.add_assign_scaled(-T::one(), &grad_b(c, &s.xp, &law)?);
        let lhs = d.frobenius_norm().powi(2);
        let q = settings.c0_power;
        let rhs = settings.c0_constant
            * (T::one() + linalg::norm(&s.x).powf(q) + linalg::norm(&s.xp).powf(q))
            * linalg::dist(&s.x, &s.xp);
        c0.record(lhs, rhs, || {
            format!("x={} x'={} t={}", fmt_vec(&s.x), fmt_vec(&s.xp), settings.grid.time(k))
        });
        c0.samples += 1;
    }
    c0.note = format!("L'={} q'={}", settings.c0_constant, settings.c0_power);

    // ρ_b(ε)/λ(ε) must decrease to zero along ε = 10^{-1}, ..., 10^{-12}
    let mut c2 = Worst::new("C2");
    let ratios: Vec<T> = (1..=12)
        .map(|j| {
            let eps = T::lit(10f64.powi(-j));
            problem.family.rho_b.eval(eps) / settings.scale.lambda(eps)
        })
        .collect();
    c2.samples = ratios.len();
    let vanishing = ratios.iter().all(|&r| r == T::zero())
        || ratios.windows(2).all(|w| w[1] < w[0]) && ratios[11] < T::lit(0.5) * ratios[0];
    c2.violation = if vanishing { T::zero() } else { ratios[11] };
    c2.rel = if vanishing { T::zero() } else { T::infinity() };
    c2.witness = format!("ratio(1e-12)={}", ratios[11]);
    c2.note = format!("theta={}", settings.scale.theta());

    let rows = vec![
        h2.finish(),
        h2p.finish(),
        h3.finish(),
        h4.finish(),
        h5.finish(),
        h6.finish(),
        h6p.finish(),
        c0.finish(),
        c1.finish(),
        c2.finish(),
    ];
    Ok(HypothesisReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{
        ConcaveModulus, DiffusionKernel, DriftKernel, JumpKernel, KernelCoefficients, PerturbationFamily,
    };
    use crate::geometry::ConvexDomain;
    use crate::jumps::{Bounds, JumpModel};

    fn ou(alpha: f64, beta: f64, domain: ConvexDomain<f64>, jump: JumpKernel<f64>, x0: f64) -> Problem<f64> {
        let l = alpha + beta + 1.0;
        let coeffs = KernelCoefficients::new(
            1,
            DriftKernel::MeanFieldOu { alpha, beta },
            DiffusionKernel::Constant(Matrix::identity(1)),
            jump,
            l,
            ConcaveModulus::linear(l).unwrap(),
        )
        .unwrap();
        let g = vec![1.0, 0.5];
        let model = JumpModel::finite(vec![0.0, 1.0], vec![0.5, 0.5], g.clone(), Bounds::from_gamma(&g)).unwrap();
        Problem::new(coeffs, PerturbationFamily::none(), domain, Some(model), vec![x0]).unwrap()
    }

    fn settings() -> HypothesisSettings<f64> {
        HypothesisSettings::new(400, 11, TimeGrid::new(1.0, 100).unwrap())
    }

    #[test]
    fn mean_field_ou_passes() {
        let p = ou(1.0, 0.5, ConvexDomain::whole_space(1).unwrap(), JumpKernel::Zero, 0.3);
        let r = check_hypotheses(&p, &settings()).unwrap();
        for row in &r.rows {
            assert!(row.pass, "{row:?}");
        }
    }

    #[test]
    fn jump_leaving_box_fails_h4() {
        let jump = JumpKernel::Linear { c0: vec![2.0], c1: 0.0, c2: 0.0 };
        let p = ou(1.0, 0.5, ConvexDomain::boxed(vec![0.0], vec![1.0]).unwrap(), jump, 0.5);
        let r = check_hypotheses(&p, &settings()).unwrap();
        let h4 = r.row("H4").unwrap();
        assert!(!h4.pass);
        assert!(h4.worst_violation > 0.5);
        assert!(h4.witness.contains("x+G"));
    }

    #[test]
    fn c2_power_comparison() {
        let mut p = ou(1.0, 0.5, ConvexDomain::whole_space(1).unwrap(), JumpKernel::Zero, 0.0);
        p.family.rho_b = PerturbationRate::Power { coef: 1.0, exponent: 1.0 };
        p.family.h_b = crate::coefficients::PerturbationDirection::Tanh;
        let r = check_hypotheses(&p, &settings()).unwrap();
        assert!(r.row("C2").unwrap().pass);
        p.family.rho_b = PerturbationRate::Power { coef: 1.0, exponent: 0.2 };
        let r = check_hypotheses(&p, &settings()).unwrap();
        assert!(!r.row("C2").unwrap().pass);
        p.family.rho_b = PerturbationRate::Constant(0.1);
        let r = check_hypotheses(&p, &settings()).unwrap();
        assert!(!r.row("H5").unwrap().pass);
    }

    #[test]
    fn sine_coupling_with_log_modulus_reports_both_forms() {
        let coeffs = KernelCoefficients::new(
            1,
            DriftKernel::SineCoupling { amp: 0.5, freq: 1.0 },
            DiffusionKernel::Zero,
            JumpKernel::Zero,
            2.0,
            ConcaveModulus::log_cap(0.3).unwrap(),
        )
        .unwrap();
        let p = Problem::new(coeffs, PerturbationFamily::none(), ConvexDomain::whole_space(1).unwrap(), None, vec![0.0]).unwrap();
        let r = check_hypotheses(&p, &settings()).unwrap();
        assert!(r.row("H2'").unwrap().pass);
        assert_eq!(r.rows.len(), 10);
    }
}
