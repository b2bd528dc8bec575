use std::f64::consts::PI;

use fracsource_core::forward::*;
use fracsource_core::mittag_leffler::ml;
use fracsource_core::spectral::*;
use fracsource_core::temporal::TemporalSource;

fn constant(mu0: f64) -> TemporalSource {
    TemporalSource::Constant { mu0 }
}

#[test]
fn constant_source_closed_form() {
    let src = constant(1.0);
    for &alpha in &[0.5, 1.3] {
        for &lambda in &[1.0, 1e3] {
            for &t in &[1e-2, 0.7, 30.0, 1e4] {
                let q = psi_quadrature(lambda, alpha, &src, t).unwrap().value;
                let exact = (1.0 - ml(alpha, 1.0, lambda * t.powf(alpha))) / lambda;
                assert!((q - exact).abs() <= 1e-8 * exact.abs(), "a={alpha} l={lambda} t={t}");
            }
        }
    }
}

#[test]
fn exponential_kernel_oracle() {
    // α = 1 reduces ψ to ∫_0^t e^{-λ(t-s)} μ(s) ds; 30-digit reference values
    let cases = [
        (
            TemporalSource::InverseLinear {
                amplitude: 1.0,
                rate: 1.0,
            },
            [0.24791959675595473669, 0.1460690378970916942, 0.024405549639127117448],
        ),
        (
            TemporalSource::SubGaussian { c1: 1.0, c2: 1.0 },
            [0.19090476198391176836, 0.10518556463148079104, 0.0060545879512953706721],
        ),
    ];
    for (src, expected) in cases {
        for (t, e) in [0.5, 3.0, 20.0].into_iter().zip(expected) {
            let v = psi_n(2.0, 1.0, &src, t).unwrap().value();
            assert!((v - e).abs() <= 1e-10 * e, "{} t={t}: {v} vs {e}", src.family_name());
        }
    }
}

#[test]
fn split_and_raw_quadrature_agree() {
    let src = TemporalSource::RationalTail {
        coeffs: vec![1.5, -0.5, 0.25],
    };
    for &alpha in &[0.6, 1.4] {
        for &t in &[0.1, 5.0, 300.0] {
            let a = psi_n(3.0, alpha, &src, t).unwrap().value();
            let b = psi_quadrature(3.0, alpha, &src, t).unwrap().value;
            assert!((a - b).abs() <= 1e-9 * a.abs(), "a={alpha} t={t}: {a} {b}");
        }
    }
}

#[test]
fn psi_is_continuous_at_zero() {
    let src = TemporalSource::InverseLinear {
        amplitude: 1.0,
        rate: 1.0,
    };
    let small = psi_n(1.0, 0.7, &src, 1e-10).unwrap().value();
    assert!(small.abs() < 1e-5);
}

#[test]
fn lemma_bound_grows_at_most_logarithmically() {
    let src = TemporalSource::DampedOscillation {
        amplitude: 1.0,
        decay: 0.1,
        frequency: 2.0,
    };
    for &lambda in &[1.0f64, 100.0] {
        let scale = src.sup_norm() * (1.0 + lambda).ln() / lambda;
        let times = geometric_times(1e-1, 1e4, 11).unwrap();
        for &t in &times {
            let ratio = psi_n(lambda, 0.7, &src, t).unwrap().value().abs() / scale;
            assert!(ratio <= 2.0 * (1.0 + (1.0 + t).ln()), "λ={lambda} t={t} ratio {ratio}");
        }
    }
}

#[test]
fn psi_is_linear_in_mu() {
    let tail = |c: Vec<f64>| TemporalSource::RationalTail { coeffs: c };
    let a = tail(vec![0.0, 1.0, 2.0]);
    let b = tail(vec![0.0, -3.0, 0.5]);
    let combo = tail(vec![0.0, 2.0 * 1.0 - 3.0, 2.0 * 2.0 + 0.5]);
    for &t in &[0.3, 40.0] {
        let pa = psi_quadrature(5.0, 0.8, &a, t).unwrap().value;
        let pb = psi_quadrature(5.0, 0.8, &b, t).unwrap().value;
        let pc = psi_quadrature(5.0, 0.8, &combo, t).unwrap().value;
        assert!((pc - (2.0 * pa + pb)).abs() <= 1e-12 * pc.abs().max(pa.abs()));
    }
}

#[test]
fn single_mode_trace_is_psi_times_mode() {
    let sys = build_dirichlet_laplacian(PI, 8).unwrap();
    let src = constant(1.0);
    let times = geometric_times(1e-1, 1e3, 9).unwrap();
    let spec = ObservationSpec::new(ObservationKind::InteriorPoint { x0: 1.1 }, times.clone()).unwrap();
    let trace = solve(&sys, &[1.0], &src, 0.7, &spec, SolveOptions::default()).unwrap();
    for (v, &t) in trace.values().iter().zip(&times) {
        let psi = psi_n(1.0, 0.7, &src, t).unwrap().value();
        assert!((v - psi * sys.mode_value(0, 1.1)).abs() <= 1e-15 * v.abs().max(1e-300) * 4.0);
    }
    let last = trace.values()[times.len() - 1];
    let limit = sys.mode_value(0, 1.1);
    assert!((last - limit).abs() < 0.05 * limit);
    assert_eq!(trace.baseline[0], limit);
}

#[test]
fn solve_is_linear_in_f() {
    let sys = build_dirichlet_laplacian(PI, 6).unwrap();
    let src = TemporalSource::InverseLinear {
        amplitude: 1.0,
        rate: 1.0,
    };
    let times = geometric_times(1e-1, 1e2, 6).unwrap();
    let spec = ObservationSpec::new(ObservationKind::BoundaryFlux { endpoint: Endpoint::Left }, times).unwrap();
    let opts = SolveOptions {
        n_modes: 6,
        ..SolveOptions::default()
    };
    let f = [1.0, -0.5, 0.25, 0.0, 0.1, 0.0];
    let g = [0.0, 2.0, 0.0, -1.0, 0.0, 0.3];
    let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    let tf = solve(&sys, &f, &src, 0.7, &spec, opts).unwrap().values();
    let tg = solve(&sys, &g, &src, 0.7, &spec, opts).unwrap().values();
    let tfg = solve(&sys, &fg, &src, 0.7, &spec, opts).unwrap().values();
    for i in 0..tf.len() {
        let expected = 2.0 * tf[i] - 3.0 * tg[i];
        assert!((tfg[i] - expected).abs() <= 1e-12 * expected.abs().max(1e-12));
    }
}

#[test]
fn steady_state_matches_elliptic_solution() {
    // -w'' = μ0 x(π-x) with w(0) = w(π) = 0
    let mu0 = 2.0;
    let w = |x: f64| mu0 * (x.powi(4) / 12.0 - PI * x.powi(3) / 6.0 + PI.powi(3) * x / 12.0);
    let sys = build_dirichlet_laplacian(PI, 128).unwrap();
    let a = project(&SpatialSource::function(|x| x * (PI - x)), &sys).coefficients;
    let x0 = 1.3;
    let spec = ObservationSpec::new(ObservationKind::InteriorPoint { x0 }, vec![1e6]).unwrap();
    let opts = SolveOptions {
        n_modes: 32,
        ..SolveOptions::default()
    };
    let trace = solve(&sys, &a, &constant(mu0), 0.7, &spec, opts).unwrap();
    let err = (trace.baseline[0] - w(x0)).abs();
    assert!(err <= trace.tail_bound[0], "{err} vs bound {}", trace.tail_bound[0]);
    assert!(err < 1e-6);
}

#[test]
fn steady_state_matches_tridiagonal_solve() {
    let q = |x: f64| x.sin();
    let n = 512;
    let sys = build_sturm_liouville(&|_| 1.0, &q, PI, n, 64).unwrap();
    let f = |x: f64| x * (PI - x) * (1.0 + x);
    let a = project(&SpatialSource::function(f), &sys).coefficients;
    // direct solve of the same finite-difference system
    let h = PI / n as f64;
    let m = n - 1;
    let mut diag: Vec<f64> = (1..n).map(|i| 2.0 / (h * h) + q(i as f64 * h)).collect();
    let off = -1.0 / (h * h);
    let mut rhs: Vec<f64> = (1..n).map(|i| f(i as f64 * h)).collect();
    for i in 1..m {
        let r = off / diag[i - 1];
        diag[i] -= r * off;
        rhs[i] -= r * rhs[i - 1];
    }
    let mut wsol = vec![0.0; m];
    wsol[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        wsol[i] = (rhs[i] - off * wsol[i + 1]) / diag[i];
    }
    let node = 200;
    let x0 = node as f64 * h;
    let spec = ObservationSpec::new(ObservationKind::InteriorPoint { x0 }, vec![1e8]).unwrap();
    let opts = SolveOptions {
        n_modes: 32,
        ..SolveOptions::default()
    };
    let trace = solve(&sys, &a, &constant(1.0), 0.5, &spec, opts).unwrap();
    let err = (trace.baseline[0] - wsol[node - 1]).abs();
    assert!(err <= trace.tail_bound[0], "{err} vs {}", trace.tail_bound[0]);
}

#[test]
fn subdomain_norm_of_single_mode() {
    let sys = build_dirichlet_laplacian(PI, 4).unwrap();
    let src = constant(1.0);
    let spec = ObservationSpec::new(ObservationKind::SubdomainNorm { a: 0.0, b: PI }, vec![2.0]).unwrap();
    let trace = solve(&sys, &[0.0, 3.0], &src, 0.7, &spec, SolveOptions::default()).unwrap();
    let psi = psi_n(4.0, 0.7, &src, 2.0).unwrap().value();
    assert!((trace.values()[0] - 3.0 * psi).abs() < 1e-12);
}

#[test]
fn transient_decays_like_leading_term() {
    // μ ≡ 1, one mode: ψ - 1/λ = -E_{α,1}(-λ t^α)/λ ~ t^{-α}
    let alpha = 0.7;
    let sys = build_dirichlet_laplacian(PI, 2).unwrap();
    let times = geometric_times(1e1, 1e5, 30).unwrap();
    let spec = ObservationSpec::new(ObservationKind::InteriorPoint { x0: 1.0 }, times.clone()).unwrap();
    let trace = solve(&sys, &[1.0], &constant(1.0), alpha, &spec, SolveOptions::default()).unwrap();
    let probe = decay_probe(&times, &trace.transient, 0.5).unwrap();
    assert!((probe.slope + alpha).abs() < 0.01, "{}", probe.slope);
    assert!(probe.decaying);
    assert_eq!(probe.sign_changes, 0);
}

#[test]
fn oscillating_tail_is_flagged() {
    let times = geometric_times(1.0, 1e4, 60).unwrap();
    let v: Vec<f64> = times.iter().map(|t| t.powf(-1.5) * (3.0 * t.ln()).cos()).collect();
    let p = decay_probe(&times, &v, 1.0).unwrap();
    assert!(p.sign_changes > 0);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sys = build_dirichlet_laplacian(PI, 12).unwrap();
    let a = project(&SpatialSource::function(|x| x * (PI - x)), &sys).coefficients;
    let src = TemporalSource::InverseLinear {
        amplitude: 1.0,
        rate: 1.0,
    };
    let times = geometric_times(1e-1, 1e3, 8).unwrap();
    let spec = ObservationSpec::new(ObservationKind::InteriorPoint { x0: 0.9 }, times).unwrap();
    let opts = SolveOptions {
        n_modes: 8,
        ..SolveOptions::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| solve(&sys, &a, &src, 0.7, &spec, opts).unwrap())
    };
    let one = run(1);
    let four = run(4);
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(one.values()), bits(four.values()));
    assert_eq!(bits(one.tail_bound), bits(four.tail_bound));
}
