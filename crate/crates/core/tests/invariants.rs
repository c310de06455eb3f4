use birkhoff::pressure::{bowen_dimension, letter_moments};
use birkhoff::rate::fit_rate_exponent;
use birkhoff::spectrum::{geometric_grid, solve_point, SpectrumCurve, SpectrumPoint};
use birkhoff::{System, SystemSpec};
use proptest::prelude::*;

fn builtin() -> impl Strategy<Value = SystemSpec> {
    prop_oneof![
        (2u32..5).prop_map(|r| SystemSpec::new("lueroth").with("r", r as f64)),
        (2u32..5).prop_map(|r| SystemSpec::new("gauss").with("r", r as f64)),
        (1.5f64..4.0, 0.5f64..1.4).prop_map(|(r, s)| SystemSpec::new("linear_poly").with("r", r).with("s", s)),
        Just(SystemSpec::new("linear_count")),
        Just(SystemSpec::new("linear_exp")),
        Just(SystemSpec::new("mp_induced")),
    ]
}

fn binary_entropy(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn descriptor_roundtrip(spec in builtin()) {
        let text = spec.to_string();
        let back: SystemSpec = text.parse().unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn pressure_convex_in_q_and_decreasing_in_b(spec in builtin(), q in 0.06f64..0.5, h in 0.005f64..0.05) {
        let sys = spec.build().unwrap();
        let p = |q: f64, b: f64| letter_moments(&sys, q, b).unwrap().log_z;
        let d2 = p(q - h, 1.0) - 2.0 * p(q, 1.0) + p(q + h, 1.0);
        prop_assert!(d2 >= -1e-9, "second difference {d2}");
        prop_assert!(p(q, 1.0 + h) < p(q, 1.0));
    }

    #[test]
    fn moran_root_solves_the_length_equation(l1 in 0.05f64..0.6, l2 in 0.05f64..0.35) {
        let sys = System::finite_linear("moran", vec![l1, l2], vec![1.0, 2.0]).unwrap();
        let b = bowen_dimension(&sys, 1e-14).unwrap().b_star;
        prop_assert!((l1.powf(b) + l2.powf(b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_branch_closed_form(alpha in 1.05f64..1.48) {
        let sys = System::two_branch(1.0, 2.0).unwrap();
        let pt = solve_point(&sys, alpha, (0.5, 0.9), 1e-12).unwrap();
        let q = ((2.0 - alpha) / (alpha - 1.0)).ln();
        let b = binary_entropy(alpha - 1.0) / std::f64::consts::LN_2;
        prop_assert!((pt.q - q).abs() < 1e-8, "q {} vs {}", pt.q, q);
        prop_assert!((pt.b - b).abs() < 1e-10, "b {} vs {}", pt.b, b);
    }

    #[test]
    fn synthetic_rate_exponent_recovered(gamma in 0.3f64..1.5, c in 0.5f64..5.0) {
        let grid = geometric_grid(1e2, 1e6, 33).unwrap();
        let points = grid
            .iter()
            .map(|&a| SpectrumPoint {
                alpha: a,
                q: c * gamma * a.powf(-gamma - 1.0),
                b: 1.0 - c * a.powf(-gamma),
                lyapunov: 1.0,
                entropy: 1.0 - c * a.powf(-gamma),
                residual_p: 0.0,
                residual_dp: 0.0,
                mean_tau: a,
                truncation_n: 0,
                newton_iters: 0,
            })
            .collect();
        let curve = SpectrumCurve { grid, points, b_star: 1.0, failures: vec![] };
        let f = fit_rate_exponent(&curve, 1.0, None, None).unwrap();
        prop_assert!((f.fitted_exponent - gamma).abs() < 1e-5, "{} vs {gamma}", f.fitted_exponent);
    }

    #[test]
    fn geometric_grid_is_geometric(lo in 1.0f64..1e3, decades in 0.5f64..5.0, count in 2usize..80) {
        let hi = lo * 10f64.powf(decades);
        let g = geometric_grid(lo, hi, count).unwrap();
        prop_assert_eq!(g.len(), count);
        prop_assert!((g[0] - lo).abs() <= 1e-12 * lo);
        prop_assert!((g[count - 1] - hi).abs() <= 1e-12 * hi);
        let r = g[1] / g[0];
        for w in g.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!((w[1] / w[0] / r - 1.0).abs() < 1e-9);
        }
    }
}
