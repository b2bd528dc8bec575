use std::f64::consts::PI;

use fracsource_core::error::Error;
use fracsource_core::spectral::*;
use proptest::prelude::*;

// -u'' + x u = λ u on (0, 1), from an independent shooting/bisection solve
const SHOOTING: [f64; 5] = [
    10.368507161836458,
    39.97874478988393,
    89.32663454248006,
    158.41378981431245,
    247.24018932857155,
];

fn one(_: f64) -> f64 {
    1.0
}

#[test]
fn finite_differences_match_closed_form() {
    let fd = build_sturm_liouville(&one, &|_| 0.0, PI, 800, 10).unwrap();
    let h = PI / 800.0;
    for (n, l) in fd.lambdas.iter().enumerate() {
        let exact = ((n + 1) * (n + 1)) as f64;
        // the second-order error is λ² h² / 12 to leading order
        assert!((l - exact).abs() <= exact * exact * h * h / 6.0, "n={n} {l}");
    }
}

#[test]
fn constant_potential_shifts_spectrum() {
    let fd = build_sturm_liouville(&one, &|_| 2.5, PI, 800, 6).unwrap();
    let base = build_sturm_liouville(&one, &|_| 0.0, PI, 800, 6).unwrap();
    for (a, b) in fd.lambdas.iter().zip(&base.lambdas) {
        assert!((a - b - 2.5).abs() < 1e-9);
    }
}

#[test]
fn linear_potential_matches_shooting() {
    let fd = build_sturm_liouville(&one, &|x| x, 1.0, 2048, 5).unwrap();
    for (l, s) in fd.lambdas.iter().zip(SHOOTING) {
        assert!((l - s).abs() / s < 1e-4, "{l} vs {s}");
    }
}

#[test]
fn second_order_convergence() {
    let coarse = build_sturm_liouville(&one, &|x| x, 1.0, 200, 3).unwrap();
    let fine = build_sturm_liouville(&one, &|x| x, 1.0, 400, 3).unwrap();
    let finer = build_sturm_liouville(&one, &|x| x, 1.0, 800, 3).unwrap();
    for n in 0..3 {
        let ratio = (coarse.lambdas[n] - fine.lambdas[n]) / (fine.lambdas[n] - finer.lambdas[n]);
        assert!((ratio - 4.0).abs() < 0.05, "n={n} ratio {ratio}");
    }
}

#[test]
fn modes_are_orthonormal() {
    let fd = build_sturm_liouville(&|x| 1.0 + 0.5 * x, &|x| x.sin(), PI, 640, 40).unwrap();
    assert!(fd.orthonormality_defect() <= 1e-8, "{}", fd.orthonormality_defect());
    let an = build_dirichlet_laplacian(2.0, 40).unwrap();
    assert!(an.orthonormality_defect() <= 1e-12);
}

#[test]
fn finite_difference_modes_and_fluxes_approach_sines() {
    let fd = build_sturm_liouville(&one, &|_| 0.0, PI, 1600, 3).unwrap();
    let an = build_dirichlet_laplacian(PI, 3).unwrap();
    for n in 0..3 {
        for x in [0.3, 1.1, 2.9] {
            assert!((fd.mode_value(n, x) - an.mode_value(n, x)).abs() < 1e-5);
        }
        for side in 0..2 {
            let (a, b) = (fd.boundary_slopes[n][side], an.boundary_slopes[n][side]);
            assert!((a - b).abs() < 1e-5 * b.abs(), "n={n} side={side} {a} {b}");
        }
    }
}

#[test]
fn rejects_bad_coefficients() {
    let err = build_sturm_liouville(&|x| x - 0.5, &|_| 0.0, 1.0, 64, 4).unwrap_err();
    match err {
        Error::CoefficientViolation { what, location, .. } => {
            assert_eq!(what, "a");
            assert!(location < 0.5);
        }
        e => panic!("unexpected {e:?}"),
    }
    let err = build_sturm_liouville(&one, &|x| 0.2 - x, 1.0, 64, 4).unwrap_err();
    assert!(matches!(err, Error::CoefficientViolation { what: "q", .. }));
    assert!(build_sturm_liouville(&one, &|_| 0.0, 1.0, 30, 4).is_err());
}

#[test]
fn projection_of_modes_is_exact() {
    let sys = build_dirichlet_laplacian(PI, 6).unwrap();
    let f = SpatialSource::function(|x| (2.0 / PI).sqrt() * (2.0 * x).sin());
    let p = project(&f, &sys);
    for (n, a) in p.coefficients.iter().enumerate() {
        let expected = if n == 1 { 1.0 } else { 0.0 };
        assert!((a - expected).abs() < 1e-13);
    }
    let f = SpatialSource::function(|x| (2.0 / PI).sqrt() * (3.0 * x.sin() - (3.0 * x).sin()));
    let p = project(&f, &sys);
    let expected = [3.0, 0.0, -1.0, 0.0, 0.0, 0.0];
    for (a, e) in p.coefficients.iter().zip(expected) {
        assert!((a - e).abs() < 1e-13);
    }
    assert!(p.parseval_defect.abs() < 1e-12);
}

#[test]
fn projection_of_parabola_matches_sine_series() {
    // ∫_0^π x(π-x) sin(nx) dx = 2(1 - (-1)^n)/n³
    let sys = build_dirichlet_laplacian(PI, 12).unwrap();
    let p = project(&SpatialSource::function(|x| x * (PI - x)), &sys);
    for (k, a) in p.coefficients.iter().enumerate() {
        let n = (k + 1) as f64;
        let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
        let exact = (2.0 / PI).sqrt() * 2.0 * (1.0 - sign) / n.powi(3);
        assert!((a - exact).abs() < 1e-8, "n={n} {a} {exact}");
    }
    assert!(p.parseval_defect >= 0.0);
}

#[test]
fn weyl_scaling() {
    let sys = build_dirichlet_laplacian(PI, 40).unwrap();
    let fit = weyl_check(&sys).unwrap();
    assert!((fit.exponent - 2.0).abs() < 1e-12);
    assert!((fit.constant - 1.0).abs() < 1e-10);
    let fd = build_sturm_liouville(&one, &|x| x.sin(), PI, 1600, 50).unwrap();
    let fit = weyl_check(&fd).unwrap();
    assert!((fit.exponent - 2.0).abs() <= 0.04, "{}", fit.exponent);
}

#[test]
fn blind_spot_of_second_mode_is_midpoint() {
    let sys = build_dirichlet_laplacian(PI, 4).unwrap();
    let spots = blind_spots(&sys, &[0.0, 1.0], 1e-8);
    assert_eq!(spots.interior.len(), 1);
    assert!((spots.interior[0] - PI / 2.0).abs() < 1e-10);
    assert!(spots.boundary.is_empty());
    assert!(spots.warning.is_none());
}

#[test]
fn first_mode_has_no_blind_spots() {
    let sys = build_dirichlet_laplacian(PI, 4).unwrap();
    let spots = blind_spots(&sys, &[1.0], 1e-8);
    assert!(spots.interior.is_empty() && spots.boundary.is_empty());
}

#[test]
fn two_mode_blind_spots_agree_with_dense_scan() {
    // brute-force scan: a common zero of sin x and sin 2x inside (0, π) would
    // show up as a simultaneous sign change; there is none
    let n = 200_000;
    let mut common = 0;
    for i in 1..n {
        let (x0, x1) = (PI * i as f64 / n as f64, PI * (i + 1) as f64 / n as f64);
        let c1 = x0.sin().signum() != x1.sin().signum();
        let c2 = (2.0 * x0).sin().signum() != (2.0 * x1).sin().signum();
        if c1 && c2 {
            common += 1;
        }
    }
    let sys = build_dirichlet_laplacian(PI, 4).unwrap();
    let spots = blind_spots(&sys, &[1.0, 1.0], 1e-8);
    assert_eq!(spots.interior.len(), common);
}

#[test]
fn vanishing_source_is_flagged() {
    let sys = build_dirichlet_laplacian(PI, 4).unwrap();
    let spots = blind_spots(&sys, &[1e-12, 0.0], 1e-8);
    assert!(spots.warning.is_some());
    assert_eq!(spots.boundary.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_round_trip(coeffs in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let sys = build_dirichlet_laplacian(PI, 12).unwrap();
        let c = coeffs.clone();
        let f = SpatialSource::function(move |x| {
            c.iter().enumerate().map(|(n, a)| a * (2.0 / PI).sqrt() * ((n + 1) as f64 * x).sin()).sum()
        });
        let p = project(&f, &sys);
        for (n, a) in coeffs.iter().enumerate() {
            prop_assert!((p.coefficients[n] - a).abs() <= 1e-12);
        }
    }

    #[test]
    fn eigenvalues_increase(q0 in 0.0f64..10.0, slope in 0.0f64..5.0) {
        let sys = build_sturm_liouville(&|x| 1.0 + x, &move |x| q0 + slope * x, 2.0, 160, 12).unwrap();
        prop_assert!(sys.lambdas[0] > 0.0);
        for w in sys.lambdas.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }
}
