use std::sync::Arc;

use proptest::prelude::*;

use hetero_cycle::model::{
    build_model, central_exponent, child_cycle, realize_orbit, CycleSpec, ItineraryWord, Token,
};
use hetero_cycle::quotient::{
    compose, fixed_point, franks_rescale_factor, nu_for_fixed_point, return_map, theta_bound,
    AffineMap1D, CycleCentralData, Orientation,
};
use hetero_cycle::report::{NuRow, RunReport, SolveReport};

fn affine() -> impl Strategy<Value = AffineMap1D> {
    (-4.0..4.0_f64, -4.0..4.0_f64).prop_map(|(s, i)| AffineMap1D::new(s, i))
}

fn central() -> impl Strategy<Value = CycleCentralData> {
    (0.1..0.999_f64, 1.01..3.0_f64, prop::bool::ANY)
        .prop_map(|(l, b, pos)| CycleCentralData::new(l, b, if pos { 1.0 } else { -1.0 }))
}

proptest! {
    #[test]
    fn composition_is_associative(f in affine(), g in affine(), h in affine(), x in -3.0..3.0_f64) {
        let a = compose(f, compose(g, h)).apply(x);
        let b = compose(compose(f, g), h).apply(x);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((a - f.apply(g.apply(h.apply(x)))).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn fixed_points_are_fixed(f in affine()) {
        prop_assume!((f.slope - 1.0).abs() > 1e-3);
        let x = fixed_point(f).unwrap();
        prop_assert!((f.apply(x) - x).abs() <= 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn closing_translation_fixes_one(data in central(), l in 0u64..40, m in 0u64..40) {
        let s = nu_for_fixed_point(&data, l, m);
        prop_assert!(s.residual(&data).abs() < 1e-12);
        let expected = -data.tau * data.beta.powi(m as i32) * data.lambda.powi(l as i32);
        prop_assert!((s.multiplier - expected).abs() <= 1e-12 * expected.abs());
        prop_assert_eq!(return_map(&data, s.nu, l, m).slope, s.multiplier);
        prop_assert_eq!(s.period, m + l + 4);
        if let Ok(x) = s.fixed_point(&data) {
            prop_assert!((x - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rescaled_multiplier(mult in 0.1..10.0_f64, period in 1u64..50, eps in 0.0..0.5_f64) {
        let f = franks_rescale_factor(mult, period, eps);
        let rescaled = mult.abs() * f.powi(period as i32);
        let target = (1.0 + eps).powi(period as i32);
        prop_assert!((rescaled - target).abs() <= 1e-10 * target);
    }

    #[test]
    fn theta_is_at_least_two(data in central()) {
        for o in [Orientation::Preserving, Orientation::Reversing] {
            prop_assert!(theta_bound(&data, o) >= 2.0 - 1e-12);
        }
    }

    #[test]
    fn realized_orbits_close_and_match_their_multiplier(
        data in central(),
        l in 0u64..12,
        m in 1u64..12,
        nu in -1.5..1.5_f64,
    ) {
        let sys = build_model(CycleSpec::from_central(data)).unwrap();
        let orbit = realize_orbit(&sys, ItineraryWord::lm(l, m, nu.into())).unwrap();
        let sigma = -data.tau * data.beta.powi(m as i32) * data.lambda.powi(l as i32);
        prop_assert!((orbit.sigma - sigma).abs() <= 1e-12 * sigma.abs());
        let x = orbit.base.central();
        prop_assert!(orbit.closure_defect(&sys) <= 1e-9 * (1.0 + x.abs()));
        let birkhoff = central_exponent(&sys, &orbit);
        prop_assert!((birkhoff - sigma.abs().ln() / orbit.period as f64).abs() < 1e-10);
    }

    #[test]
    fn children_of_b_multiply_exponents(data in central(), l in 0u64..30, m in 1u64..30) {
        let sys = build_model(CycleSpec::from_central(data)).unwrap();
        let b = Arc::new(realize_orbit(&sys, ItineraryWord::new(vec![Token::B(1)])).unwrap());
        let child = child_cycle(&sys, &b, l, m, 0.0).unwrap();
        let orbit = realize_orbit(&sys, child.word.clone()).unwrap();
        let log = m as f64 * data.beta.ln() + l as f64 * data.lambda.ln();
        prop_assert!((orbit.log_abs_sigma - log).abs() <= 1e-12 * (1.0 + log.abs()));
        prop_assert_eq!(orbit.period, m + l + 4);
        prop_assert!((orbit.base.central() - 1.0).abs() < 1e-9);
        prop_assert_eq!(child.nu_f64(), nu_for_fixed_point(&data, l, m).nu);
    }

    #[test]
    fn json_reports_round_trip_floats(nu in prop::num::f64::NORMAL, chi in -1.0..1.0_f64) {
        let report = RunReport {
            command: "solve".into(),
            solve: Some(SolveReport {
                nu: vec![NuRow {
                    l: 1,
                    m: 1,
                    nu,
                    nu_lo: 0.0,
                    multiplier: -nu,
                    period: 6,
                    residual: 0.0,
                    fixed_point: None,
                    chi,
                }],
                ..SolveReport::default()
            }),
            ..RunReport::default()
        };
        let back = RunReport::from_json(&report.to_json()).unwrap();
        prop_assert_eq!(back, report);
    }
}
