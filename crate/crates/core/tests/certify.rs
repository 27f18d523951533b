mod common;

use common::{family_run, family_warps, rel_err};
use pharmonic::asymptotics::{plateau_values, theoretical_d};
use pharmonic::certify::{a2_sign_condition, analyze_terms, scan_sign, AsymptoticConstants, CertifyError};
use pharmonic::operators::{hessian_convexity_check, log_grid};
use pharmonic::profile_ode::integrate;
use pharmonic::{ConvexProfile, FitWindow, ModelParameters, SolverConfig};

fn certified(mut h: ConvexProfile) -> ConvexProfile {
    let j = pharmonic::geometry::make_target_warp(0.5).unwrap();
    assert!(hessian_convexity_check(&mut h, &j, &log_grid(1e-6, 1e3, 16)).convex);
    h
}

#[test]
fn linear_profile_certificate() {
    let sol = family_run(1e4);
    let cert = scan_sign(&sol, &certified(ConvexProfile::linear()), 1.0, 1e4, 64).unwrap();
    assert!(!cert.is_empty());
    for pt in &cert.points {
        assert!(pt.direct < 0.0 && pt.terms.product < 0.0);
        assert!(pt.terms.a1 > 0.0 && pt.terms.a2 < 0.0 && pt.terms.a3 == 0.0);
        assert!((pt.direct - pt.terms.product).abs() <= 1e-8 * pt.direct.abs());
    }
    let s: Vec<f64> = cert.points.iter().map(|p| p.state.s).collect();
    assert!(s.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(cert.first_negative_radius, s.first().copied());
}

#[test]
fn certificate_is_invariant_under_scaling() {
    let sol = family_run(1e4);
    let radii = |lambda: f64| {
        let h = certified(ConvexProfile::linear()).scaled(lambda);
        scan_sign(&sol, &h, 1.0, 1e4, 32).unwrap().points.iter().map(|p| p.state.s).collect::<Vec<_>>()
    };
    let base = radii(1.0);
    assert_eq!(radii(0.5), base);
    assert_eq!(radii(2.0), base);
}

#[test]
fn linquad_profile_scan() {
    let sol = family_run(1e4);
    let cert = scan_sign(&sol, &certified(ConvexProfile::linquad()), 1.0, 1e4, 32).unwrap();
    assert!(!cert.is_empty());
    assert!(cert.negative_fraction > 0.0 && cert.negative_fraction <= 1.0);
}

#[test]
fn harmonic_control_certifies_nothing() {
    let params = ModelParameters::new(2, 2.0, 3.0, 0.5, 1.0);
    let (g, j) = family_warps(&params);
    let cfg = SolverConfig { allow_inadmissible: true, ..SolverConfig::default() };
    let sol = integrate(&params, &g, &j, &cfg).unwrap();
    for h in [ConvexProfile::linear(), ConvexProfile::quadratic(), ConvexProfile::linquad()] {
        assert!(scan_sign(&sol, &certified(h), 1.0, 1e4, 32).unwrap().is_empty());
    }
}

#[test]
fn uncertified_profile_is_refused() {
    let sol = family_run(1e2);
    let err = scan_sign(&sol, &ConvexProfile::linear(), 1.0, 1e2, 8).unwrap_err();
    assert!(matches!(err, CertifyError::NotCertified(_)));
    assert!(scan_sign(&sol, &certified(ConvexProfile::linear()), 1.0, 1e3, 8).is_err());
}

#[test]
fn term_decay_rates() {
    let sol = family_run(1e4);
    let lim = plateau_values(&sol).unwrap();
    let d = theoretical_d(lim.p_limit, lim.c_hat, &sol.params, 1.0, sol.target_warp()).unwrap();
    let constants = Some(AsymptoticConstants { c_hat: lim.c_hat, d, c1: 1.0 });
    let window = FitWindow::new(1e2, 1e4);

    let lin = analyze_terms(&sol, &certified(ConvexProfile::linear()), window, constants).unwrap();
    let a1 = &lin.terms[0];
    assert!(rel_err(a1.fit.unwrap().slope, -6.0) <= 0.1);
    assert!(a1.prefactor_rel_deviation.unwrap() <= 0.15, "{a1:?}");
    assert!(lin.terms[2].fit.is_none());
    assert!(lin.a2_dominates);

    let quad = analyze_terms(&sol, &certified(ConvexProfile::quadratic()), window, constants).unwrap();
    assert!(rel_err(quad.terms[2].fit.unwrap().slope, -9.0) <= 0.1, "{:?}", quad.terms[2]);
}

#[test]
fn a2_condition_tracks_reduced_dimension() {
    assert!(a2_sign_condition(&ModelParameters::new(2, 2.5, 3.0, 0.5, 1.0)));
    assert!(!a2_sign_condition(&ModelParameters::new(2, 3.5, 3.0, 0.5, 1.0)));
}
