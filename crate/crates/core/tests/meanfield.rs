use dcp_core::meanfield::{a_critical, bistability_point, dphi, fixed_points, integrate, phi, x_lambda, Regime};
use proptest::prelude::*;

#[test]
fn x_lambda_solves_its_equation() {
    for i in 1..=50 {
        let lambda = 0.02 * i as f64 - 0.01;
        let x = x_lambda(lambda).unwrap();
        assert!((lambda * x.exp() - (1.0 + x)).abs() < 1e-10, "{lambda}");
    }
}

#[test]
fn tangency_at_the_critical_payoff() {
    for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let p = bistability_point(lambda).unwrap();
        assert!(phi(lambda, p.a_c, p.u0).abs() < 1e-9);
        assert!(dphi(lambda, p.a_c, p.u0).abs() < 1e-6);
    }
}

#[test]
fn classification_flips_at_the_critical_payoff() {
    let ac = a_critical(0.5).unwrap();
    // independent bracket: x e^{-x} = ... solved by fixed-point iteration x = ln((1+x)/λ)
    let mut x = 1.0f64;
    for _ in 0..200 {
        x = ((1.0 + x) / 0.5).ln();
    }
    assert!((ac - (1.0 + x)).abs() < 1e-10);
    assert!((ac - 2.6783).abs() < 1e-4);
    assert_eq!(fixed_points(0.5, ac - 1e-3).unwrap().regime, Regime::GlobalExtinction);
    assert_eq!(fixed_points(0.5, ac + 1e-3).unwrap().regime, Regime::Bistable);
}

#[test]
fn rk4_is_fourth_order() {
    let exact = integrate(2.0, 1.0, 0.05, 2.0, 1e-4).unwrap().terminal();
    let e1 = (integrate(2.0, 1.0, 0.05, 2.0, 0.1).unwrap().terminal() - exact).abs();
    let e2 = (integrate(2.0, 1.0, 0.05, 2.0, 0.05).unwrap().terminal() - exact).abs();
    let order = (e1 / e2).log2();
    assert!((order - 4.0).abs() < 0.3, "{order}");
}

proptest! {
    #[test]
    fn dphi_matches_finite_differences(lambda in 0.05f64..5.0, a in -5.0f64..5.0, u in 0.01f64..0.99) {
        let h = 1e-5;
        let fd = (phi(lambda, a, u + h) - phi(lambda, a, u - h)) / (2.0 * h);
        let d = dphi(lambda, a, u);
        prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0));
    }

    #[test]
    fn roots_are_roots(lambda in 0.05f64..5.0, a in -5.0f64..8.0) {
        let r = fixed_points(lambda, a).unwrap();
        prop_assert_eq!(r.fixed_points[0].u, 0.0);
        for w in r.fixed_points.windows(2) {
            prop_assert!(w[0].u < w[1].u);
        }
        for p in &r.fixed_points {
            // roots are bracketed to 1e-12 in u
            prop_assert!(phi(lambda, a, p.u).abs() < 1e-11 * dphi(lambda, a, p.u).abs().max(100.0));
        }
    }
}
