use mvsde_core::analysis::wasserstein2;
use mvsde_core::coefficients::{ConcaveModulus, DriftKernel, EmpiricalMeasure};
use mvsde_core::geometry::{projection_kkt_residual, ConvexDomain};
use mvsde_core::jumps::ell;
use mvsde_core::linalg::{self, Matrix};
use proptest::prelude::*;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

fn domain() -> impl Strategy<Value = ConvexDomain<f64>> {
    prop_oneof![
        (point(3), prop::collection::vec(0.1f64..3.0, 3)).prop_map(|(lo, w)| {
            let hi = lo.iter().zip(&w).map(|(a, b)| a + b).collect();
            ConvexDomain::boxed(lo, hi).unwrap()
        }),
        (point(3), 0.1f64..3.0).prop_map(|(c, r)| ConvexDomain::ball(c, r).unwrap()),
        Just(
            ConvexDomain::polyhedron(
                vec![vec![1.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 1.0]],
                vec![2.0, 0.0, 0.0, 1.0],
                vec![0.5, 0.5, 0.0],
            )
            .unwrap()
        ),
    ]
}

proptest! {
    #[test]
    fn projection_is_a_nonexpansive_retraction(dom in domain(), x in point(3), y in point(3)) {
        let px = dom.project(&x).unwrap();
        let py = dom.project(&y).unwrap();
        prop_assert!(dom.contains_within(&px, 1e-9));
        prop_assert!(linalg::dist(&px, &py) <= linalg::dist(&x, &y) + 1e-12);
        prop_assert!(linalg::dist(&dom.project(&px).unwrap(), &px) <= 1e-12);
        prop_assert!(projection_kkt_residual(&dom, &x, &px).unwrap() <= 1e-9);
    }

    #[test]
    fn affine_drift_is_affine(
        a in prop::collection::vec(-2.0f64..2.0, 4),
        b in prop::collection::vec(-2.0f64..2.0, 4),
        c in point(2),
        x1 in point(2), x2 in point(2), y1 in point(2), y2 in point(2),
        s in 0.0f64..1.0,
    ) {
        let k = DriftKernel::Affine {
            x_coef: Matrix::from_row_major(2, 2, a).unwrap(),
            y_coef: Matrix::from_row_major(2, 2, b).unwrap(),
            offset: c,
        };
        let mix = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(p, q)| s * p + (1.0 - s) * q).collect() };
        let lhs = k.eval(&mix(&x1, &x2), &mix(&y1, &y2));
        let rhs = mix(&k.eval(&x1, &y1), &k.eval(&x2, &y2));
        prop_assert!(linalg::dist(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn moduli_are_concave_and_vanish_at_zero(delta in 0.01f64..0.36, l in 0.1f64..5.0, u in 0.0f64..2.0, v in 0.0f64..2.0) {
        for m in [ConcaveModulus::log_cap(delta).unwrap(), ConcaveModulus::linear(l).unwrap()] {
            prop_assert_eq!(m.eval(0.0), 0.0);
            let mid = m.eval((u + v) / 2.0);
            prop_assert!(mid + 1e-12 >= (m.eval(u) + m.eval(v)) / 2.0);
            prop_assert!(m.eval(u.max(v)) + 1e-12 >= m.eval(u.min(v)));
        }
    }

    #[test]
    fn entropy_integrand_is_convex_and_nonnegative(a in 0.0f64..20.0, b in 0.0f64..20.0, s in 0.0f64..1.0) {
        let l = |x: f64| ell(x).unwrap();
        prop_assert!(l(a) >= 0.0);
        let lhs = l(s * a + (1.0 - s) * b);
        prop_assert!(lhs <= s * l(a) + (1.0 - s) * l(b) + 1e-12);
    }

    #[test]
    fn w2_is_a_metric(
        a in prop::collection::vec(-3.0f64..3.0, 1..12),
        b in prop::collection::vec(-3.0f64..3.0, 1..12),
        c in prop::collection::vec(-3.0f64..3.0, 1..12),
    ) {
        let m = |v: &Vec<f64>| EmpiricalMeasure::new(1, v.clone()).unwrap();
        let w = |p: &Vec<f64>, q: &Vec<f64>| wasserstein2(&m(p), &m(q)).unwrap().value;
        prop_assert!(w(&a, &a) <= 1e-12);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() <= 1e-12);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        prop_assert!((w(&a, &shifted) - 0.7).abs() <= 1e-9);
    }
}
