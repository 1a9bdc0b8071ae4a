use mvsde_core::coefficients::{
    ConcaveModulus, DiffusionKernel, DriftKernel, JumpKernel, KernelCoefficients, PerturbationFamily,
};
use mvsde_core::dynamics::{simulate_particles, Problem};
use mvsde_core::geometry::ConvexDomain;
use mvsde_core::grid::TimeGrid;
use mvsde_core::jumps::{sample_controlled_prm, sample_prm, Bounds, ControlField, JumpModel};
use mvsde_core::linalg::Matrix;

fn model() -> JumpModel<f64> {
    let g = vec![0.5, 1.0, 1.5];
    JumpModel::finite(vec![-1.0, 0.0, 2.0], vec![0.5, 1.0, 1.5], g.clone(), Bounds::from_gamma(&g)).unwrap()
}

#[test]
fn prm_counts_and_marks_follow_the_intensity() {
    let m = model();
    let (t, eps) = (2.0, 0.25);
    let runs = 4000;
    let mut total = 0usize;
    let mut sq = 0f64;
    let mut by_mark = [0usize; 3];
    for seed in 0..runs {
        let log = sample_prm(&m, t, eps, seed).unwrap();
        total += log.len();
        sq += (log.len() * log.len()) as f64;
        for e in &log.events {
            assert!(e.time >= 0.0 && e.time <= t);
            by_mark[e.mark_index] += 1;
        }
        assert!(log.events.windows(2).all(|w| w[0].time <= w[1].time));
    }
    let mean = total as f64 / runs as f64;
    let expected = 3.0 * t / eps;
    // Poisson: mean equals variance
    let var = sq / runs as f64 - mean * mean;
    let se = (expected / runs as f64).sqrt();
    assert!((mean - expected).abs() < 4.0 * se, "mean {mean} vs {expected}");
    assert!((var / expected - 1.0).abs() < 0.1, "variance {var}");
    // chi-square with two degrees of freedom; 13.8 is the 0.999 quantile
    let chi2: f64 = by_mark
        .iter()
        .zip([0.5, 1.0, 1.5])
        .map(|(&o, w)| {
            let e = total as f64 * w / 3.0;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < 13.8, "chi2 {chi2}");
}

#[test]
fn thinning_keeps_the_expected_fraction() {
    let m = model();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let unit = ControlField::constant(grid, 3, 1.0);
    let half = ControlField::from_fn(grid, 3, |t, _| if t < 0.5 { 2.0 } else { 0.5 }).unwrap();
    let eps = 0.1;
    let runs = 3000u64;
    let mut n_half = 0usize;
    let mut early = 0usize;
    for seed in 0..runs {
        assert_eq!(sample_controlled_prm(&m, &unit, eps, seed).unwrap(), sample_prm(&m, 1.0, eps, seed).unwrap());
        let log = sample_controlled_prm(&m, &half, eps, seed).unwrap();
        n_half += log.len();
        early += log.events.iter().filter(|e| e.time < 0.5).count();
    }
    // intensity 3/eps * (0.5 * 2 + 0.5 * 0.5)
    let expected = 30.0 * 1.25;
    let mean = n_half as f64 / runs as f64;
    assert!((mean - expected).abs() < 4.0 * (expected / runs as f64).sqrt(), "{mean}");
    let frac = early as f64 / n_half as f64;
    assert!((frac - 0.8).abs() < 0.01, "{frac}");
}

#[test]
fn brownian_terminal_variance_scales_with_epsilon() {
    let coeffs = KernelCoefficients::new(
        1,
        DriftKernel::Zero,
        DiffusionKernel::Constant(Matrix::identity(1)),
        JumpKernel::Zero,
        1.0,
        ConcaveModulus::Linear(1.0),
    )
    .unwrap();
    let p = Problem::new(coeffs, PerturbationFamily::none(), ConvexDomain::whole_space(1).unwrap(), None, vec![0.0])
        .unwrap();
    let grid = TimeGrid::new(2.0, 20).unwrap();
    let n = 20_000;
    for eps in [0.5, 0.05] {
        let b = simulate_particles(&p, grid, eps, n, 11).unwrap();
        let v: Vec<f64> = b.states.iter().map(|s| s.last()[0]).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = eps * 2.0;
        assert!((var - target).abs() < 4.0 * target * (2.0 / n as f64).sqrt(), "eps {eps}: {var}");
    }
}
