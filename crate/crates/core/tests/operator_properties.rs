mod common;

use pharmonic::geometry::{make_domain_warp, make_target_warp, validate_parameters};
use pharmonic::operators::{
    decomposition, hessian_convexity_check, log_grid, p_laplacian_composition, p_tension_residual,
    solve_second_derivative, tension,
};
use pharmonic::{ConvexProfile, ModelParameters, PointState, WarpingFunction};
use proptest::prelude::*;

fn warps(delta: f64, sigma: f64) -> (WarpingFunction, WarpingFunction) {
    (make_domain_warp(delta).unwrap(), make_target_warp(sigma).unwrap())
}

/// Sum of absolute values of every term in the residual, for relative tolerances.
fn residual_scale(st: &PointState, g: &WarpingFunction, j: &WarpingFunction, q: &ModelParameters) -> f64 {
    let n = q.n as f64;
    let (gv, jv) = (g.eval(st.s), j.eval(st.f));
    let energy = st.f1 * st.f1 + n * jv.value * jv.value / (gv.value * gv.value);
    let drift = n / (gv.value * gv.value) * ((gv.value * gv.d1 * st.f1).abs() + (jv.value * jv.d1).abs());
    let flux = n * jv.value / gv.value.powi(3) * ((jv.d1 * st.f1 * gv.value).abs() + (jv.value * gv.d1).abs());
    st.f2.abs() + drift + (q.p - 2.0).abs() * st.f1.abs() / energy * ((st.f1 * st.f2).abs() + flux)
}

fn admissible() -> impl Strategy<Value = ModelParameters> {
    (2u32..5, 0.05f64..0.95, 0.0f64..1.0, 0.05f64..0.95, 0.1f64..3.0).prop_map(|(n, frac, dmargin, sigma, alpha)| {
        let p = n as f64 + frac;
        let delta = 1.0 / frac + 0.1 + 3.0 * dmargin;
        ModelParameters::new(n, p, delta, sigma, alpha)
    })
}

fn convex_profile() -> impl Strategy<Value = ConvexProfile> {
    (0.01f64..3.0, 0.0f64..3.0, 0.0f64..1.0)
        .prop_map(|(c1, c2, c3)| ConvexProfile::polynomial("poly", vec![0.0, c1, c2, c3]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solved_second_derivative_zeroes_residual(
        params in admissible(),
        s in 1e-2f64..1e3,
        f in 1e-3f64..5.0,
        f1 in 1e-6f64..5.0,
    ) {
        let (g, j) = warps(params.delta, params.sigma);
        let f2 = solve_second_derivative(s, f, f1, &g, &j, &params).unwrap();
        let st = PointState::new(s, f, f1, f2);
        let r = p_tension_residual(&st, &g, &j, &params).unwrap();
        prop_assert!(r.abs() <= 1e-12 * residual_scale(&st, &g, &j, &params), "residual {r}");
    }

    #[test]
    fn composition_is_homogeneous_in_h(
        params in admissible(),
        s in 1e-2f64..1e2,
        f in 1e-2f64..3.0,
        f1 in 1e-4f64..3.0,
        h in convex_profile(),
        lambda in 0.1f64..10.0,
    ) {
        let (g, j) = warps(params.delta, params.sigma);
        let f2 = solve_second_derivative(s, f, f1, &g, &j, &params).unwrap();
        let st = PointState::new(s, f, f1, f2);
        let base = p_laplacian_composition(&st, &h, &g, &j, &params).unwrap();
        let scaled = p_laplacian_composition(&st, &h.scaled(lambda), &g, &j, &params).unwrap();
        let expected = lambda.powf(params.p - 1.0) * base;
        prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
    }

    #[test]
    fn decomposition_term_signs(
        params in admissible().prop_filter("p < 3", |q| q.p < 3.0),
        s in 1e-2f64..1e3,
        f in 1e-3f64..5.0,
        f1 in 1e-6f64..5.0,
        f2 in -5.0f64..5.0,
        h in convex_profile(),
    ) {
        let (g, j) = warps(params.delta, params.sigma);
        let d = decomposition(&PointState::new(s, f, f1, f2), &h, &g, &j, &params).unwrap();
        prop_assert!(d.k >= 0.0);
        prop_assert!(d.ktilde > 0.0);
        prop_assert!(d.a1 > 0.0);
        prop_assert!(d.a3 >= 0.0);
    }

    #[test]
    fn dual_formula_on_shell(
        params in admissible(),
        s in 1e-2f64..1e2,
        f in 1e-2f64..3.0,
        f1 in 1e-4f64..3.0,
        h in convex_profile(),
    ) {
        let (g, j) = warps(params.delta, params.sigma);
        let f2 = solve_second_derivative(s, f, f1, &g, &j, &params).unwrap();
        let st = PointState::new(s, f, f1, f2);
        let direct = p_laplacian_composition(&st, &h, &g, &j, &params).unwrap();
        let grouped = decomposition(&st, &h, &g, &j, &params).unwrap().product;
        prop_assert!((direct - grouped).abs() <= 1e-8 * (1.0 + direct.abs()));
    }

    #[test]
    fn harmonic_composition_nonnegative(
        n in 2u32..5,
        delta in 1.1f64..5.0,
        sigma in 0.05f64..0.95,
        s in 1e-1f64..1e2,
        f in 1e-2f64..5.0,
        f1 in 1e-2f64..5.0,
        h in convex_profile(),
    ) {
        let params = ModelParameters::new(n, 2.0, delta, sigma, 1.0);
        let (g, j) = warps(delta, sigma);
        let f2 = solve_second_derivative(s, f, f1, &g, &j, &params).unwrap();
        let st = PointState::new(s, f, f1, f2);
        prop_assert!(tension(&st, &g, &j, n).unwrap().abs() < 1e-9 * (1.0 + f2.abs()));
        prop_assert!(p_laplacian_composition(&st, &h, &g, &j, &params).unwrap() >= -1e-12);
    }

    #[test]
    fn warp_families_satisfy_pole_conditions(delta in 1.01f64..8.0, sigma in 0.01f64..0.99) {
        let (g, j) = warps(delta, sigma);
        let grid = log_grid(1e-8, 1e6, 4);
        for w in [&g, &j] {
            let at0 = w.eval(0.0);
            prop_assert!(at0.value.abs() <= 1e-12);
            prop_assert!((at0.d1 - 1.0).abs() <= 1e-10);
            prop_assert!(w.check_pole_conditions(&grid, 1e-10).passed());
        }
        let ratio = g.value(1e6) / 1e6f64.powf(delta);
        prop_assert!((ratio - 1.0).abs() <= 0.01 || delta < 1.5, "g(s)/s^delta = {ratio}");
        let slopes: Vec<f64> = grid.iter().map(|&t| j.derivative(t)).collect();
        prop_assert!(slopes.iter().all(|&d| d > 0.0 && d <= 1.0 + 1e-12));
        prop_assert!(slopes.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn validation_is_pure(params in admissible()) {
        prop_assert_eq!(validate_parameters(&params), validate_parameters(&params));
        prop_assert!(validate_parameters(&params).all_passed());
    }
}

#[test]
fn domain_warp_growth_constant_at_cubic_exponent() {
    let g = make_domain_warp(3.0_f64).unwrap();
    assert!((g.value(1e6) / 1e18 - 1.0).abs() < 0.01);
    assert_eq!(g.growth_constant(3.0, 1e6), 1.0);
}

#[test]
fn convexity_certification_for_builtins() {
    let j = make_target_warp(0.5).unwrap();
    let grid = log_grid(1e-6, 1e3, 16);
    for mut h in [ConvexProfile::linear(), ConvexProfile::quadratic(), ConvexProfile::linquad()] {
        let report = hessian_convexity_check(&mut h, &j, &grid);
        assert!(report.convex && report.strictly_increasing, "{}", h.name());
        assert!(h.is_certified());
        assert!(h.scaled(2.0).is_certified());
    }
}
