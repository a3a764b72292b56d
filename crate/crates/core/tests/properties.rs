use proptest::prelude::*;

use yamabe_glue::config::ModelConfig;
use yamabe_glue::fowler::{cylinder_value, integrate_fowler, DelaunayProfile};
use yamabe_glue::gluing::{
    constant_model, coordinate_model, dn_inverse, dn_multiplier, high_model, solve_constants, solve_coordinates, solve_high,
    ConstantParams, CoordinateParams, HighParams, MatchingContext, NeckSlopes,
};
use yamabe_glue::interior::{conformal_identity, neck_scale, remainder_q};
use yamabe_glue::num::{smooth_step, Jet};
use yamabe_glue::spectral::{mode_count, ModeCoefficients};

fn context(eps: f64) -> MatchingContext {
    MatchingContext::new(&ModelConfig::default(), eps)
}

fn high_coefficients(values: &[f64], k_max: usize, radius: f64) -> ModeCoefficients {
    let mut c = ModeCoefficients::zeros(3, k_max, 2, radius);
    let start = mode_count(1, 3) * 2;
    for (slot, v) in c.coeffs[start..].iter_mut().zip(values.iter().cycle()) {
        *slot = *v;
    }
    c
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smooth_step_is_a_monotone_partition(s in -0.5f64..1.5, h in 1e-4f64..0.1) {
        let j = smooth_step(s);
        prop_assert!((0.0..=1.0).contains(&j.v));
        prop_assert!(j.d1 >= 0.0);
        prop_assert!((j.v + smooth_step(1.0 - s).v - 1.0).abs() < 1e-14);
        prop_assert!(smooth_step(s + h).v >= j.v);
    }

    #[test]
    fn constants_round_trip(eps in 0.02f64..0.2, b0 in -0.3f64..0.3, b1 in -0.3f64..0.3, r0 in -1e-3f64..1e-3, r1 in -1e-3f64..1e-3) {
        let ctx = context(eps);
        let p = ConstantParams { b: vec![b0, b1], rho: vec![r0, r1] };
        let q = solve_constants(&ctx, &constant_model(&ctx, &p)).unwrap();
        prop_assert!(max_diff(&p.b, &q.b) < 1e-10);
        prop_assert!(max_diff(&p.rho, &q.rho) < 1e-12);
    }

    #[test]
    fn coordinates_round_trip(eps in 0.02f64..0.2, seed in prop::collection::vec(-1.0f64..1.0, 15)) {
        let ctx = context(eps);
        let profile = DelaunayProfile::new(3, eps).unwrap();
        let slopes = NeckSlopes::new(&profile, neck_scale(3, eps, ctx.kappa, 0.0), ctx.radius);
        let p = CoordinateParams {
            a: seed[0..3].to_vec(),
            linear: vec![seed[3..6].to_vec()],
            omega: vec![seed[6..9].iter().map(|x| x * ctx.radius).collect(), seed[9..12].iter().map(|x| x * ctx.radius).collect()],
        };
        let q = solve_coordinates(&ctx, slopes, &coordinate_model(&ctx, slopes, &p)).unwrap();
        prop_assert!(max_diff(&p.a, &q.a) < 1e-8);
        prop_assert!(max_diff(&p.linear[0], &q.linear[0]) < 1e-8);
        for i in 0..2 {
            prop_assert!(max_diff(&p.omega[i], &q.omega[i]) < 1e-10);
        }
    }

    #[test]
    fn high_round_trip(phi in prop::collection::vec(-1.0f64..1.0, 7), theta in prop::collection::vec(-1.0f64..1.0, 5)) {
        let p = HighParams { theta: high_coefficients(&theta, 4, 0.05), phi: high_coefficients(&phi, 4, 0.05) };
        let q = solve_high(&high_model(&p)).unwrap();
        prop_assert!(max_diff(&p.theta.coeffs, &q.theta.coeffs) < 1e-13);
        prop_assert!(max_diff(&p.phi.coeffs, &q.phi.coeffs) < 1e-13);
    }

    #[test]
    fn dn_inverse_divides_by_multiplier(values in prop::collection::vec(-1.0f64..1.0, 9), k_max in 2usize..6) {
        let psi = high_coefficients(&values, k_max, 0.1);
        let phi = dn_inverse(&psi).unwrap();
        for k in 2..=k_max {
            let scaled: Vec<f64> = phi.level_block(k).iter().map(|x| x * dn_multiplier(k, 3)).collect();
            prop_assert!(max_diff(&scaled, psi.level_block(k)) < 1e-14);
        }
    }

    #[test]
    fn fowler_energy_is_conserved(frac in 0.05f64..0.95) {
        let tr = integrate_fowler(3, frac * cylinder_value(3), 0.0, 20.0, 1e-3).unwrap();
        prop_assert!(tr.drift <= 1e-8);
        prop_assert!(tr.v.values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn remainder_is_quadratic(u in 0.1f64..1.0, v0 in -1.0f64..1.0, v1 in -1.0f64..1.0) {
        let base = [0.6 * u, 0.8 * u];
        let q = |s: f64| remainder_q(3, &base, &[s * v0, s * v1]).unwrap();
        let (a, b) = (q(1e-3), q(5e-4));
        for c in 0..2 {
            prop_assert!((a[c] - 4.0 * b[c]).abs() <= 1e-2 * a[c].abs() + 1e-18);
        }
    }

    #[test]
    fn conformal_identity_holds(rho in 0.05f64..3.0, a in 0.1f64..2.0, w in 0.1f64..3.0, n in 3u32..7) {
        let v = Jet { v: a + rho * rho, d1: 2.0 * rho, d2: 2.0 };
        let u = Jet { v: (w * rho).cos(), d1: -w * (w * rho).sin(), d2: -w * w * (w * rho).cos() };
        let (l, r) = conformal_identity(n, rho, u, v);
        prop_assert!((l - r).abs() <= 1e-9 * (1.0 + r.abs()));
    }
}
