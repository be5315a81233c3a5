use super::*;
use crate::dynamics::{random_initial_state, simulate, CglParams, Provenance};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn grid(m: usize) -> GridSpec {
    GridSpec::new(m).unwrap()
}

fn window(t: f64, dt: f64) -> Vec<f64> {
    let n = (t / dt).round() as usize;
    (0..=n).map(|j| -((n - j) as f64) * dt).collect()
}

fn constant_coeffs(g: GridSpec, times: &[f64], a: Complex64, b: Complex64) -> VariationalCoefficients {
    let n = times.len();
    VariationalCoefficients::new(
        times.to_vec(),
        vec![SpectralField::constant(g, a); n],
        vec![SpectralField::constant(g, b); n],
    )
    .unwrap()
}

fn one_state_traj(psi: SpectralField, beta: f64, delta: f64) -> Trajectory {
    let p = CglParams::cubic(1.0, beta, delta, psi.grid(), 0.1).unwrap();
    Trajectory::new(p, vec![0.0], vec![psi], Provenance::default()).unwrap()
}

#[test]
fn linearization_at_zero_and_one() {
    let (beta, delta) = (0.7, -0.4);
    let f = NonlinearitySpec::Cubic { beta, delta };
    let g = grid(4);
    let at_zero = linearize_coefficients(&one_state_traj(SpectralField::zeros(g), beta, delta), &f).unwrap();
    assert!((at_zero.a[0].get(WaveVector::ZERO) + c(1.0, beta)).norm() < 1e-15);
    assert!(at_zero.b[0].l2_norm() < 1e-15);
    assert_eq!(at_zero.times, vec![0.0]);

    let one = SpectralField::constant(g, c(1.0, 0.0));
    let at_one = linearize_coefficients(&one_state_traj(one, beta, delta), &f).unwrap();
    let a = -c(1.0, beta) + 2.0 * c(1.0, delta);
    assert!((at_one.a[0].get(WaveVector::ZERO) - a).norm() < 1e-14);
    assert!((at_one.b[0].get(WaveVector::ZERO) - c(1.0, delta)).norm() < 1e-14);
}

#[test]
fn linearization_matches_difference_quotients() {
    let f = NonlinearitySpec::Cubic { beta: 0.5, delta: 1.0 };
    let g = grid(8);
    let psi = random_initial_state(g, 5, 2.0).to_physical();
    let v = random_initial_state(g, 6, 2.0).to_physical();
    let mut errors = Vec::new();
    for eps in [1e-3, 1e-4] {
        let mut worst = 0.0f64;
        for (&p, &d) in psi.values().iter().zip(v.values()) {
            let quotient = (f.eval(p + d * eps) - f.eval(p)) / eps;
            let (dp, dbar) = f.derivatives(p);
            worst = worst.max((quotient - (dp * d + dbar * d.conj())).norm());
        }
        errors.push(worst);
    }
    // first-order remainder: the error shrinks with eps
    let ratio = errors[0] / errors[1];
    assert!((8.0..12.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn gauge_examples() {
    let g = grid(4);
    let times = window(2.0, 0.1);
    let zero_mean = constant_coeffs(g, &times, c(0.0, 0.0), c(0.3, 0.1));
    let (same, gauge) = gauge_zero_mean(&zero_mean).unwrap();
    assert!(gauge.exponent.iter().all(|e| e.norm() == 0.0));
    assert_eq!(same.b, zero_mean.b);

    let a = c(0.4, -1.3);
    let coeffs = constant_coeffs(g, &times, a, c(0.2, 0.0));
    let (gauged, gauge) = gauge_zero_mean(&coeffs).unwrap();
    for (j, &t) in times.iter().enumerate() {
        assert!((gauge.weight(j) - (a * t).exp()).norm() < 1e-13);
        assert!(gauged.mean_a[j].norm() < 1e-12);
        let phase = Complex64::from_polar(1.0, 2.0 * a.im * t);
        assert!((gauged.b[j].get(WaveVector::ZERO) - 0.2 * phase).norm() < 1e-13);
    }
    let k = coeffs.k_bound;
    for (j, &t) in times.iter().enumerate() {
        let m = gauge.weight(j).norm();
        assert!(m >= (-k * t.abs()).exp() - 1e-14 && m <= (k * t.abs()).exp() + 1e-14);
    }
    let v: Vec<SpectralField> = (0..times.len()).map(|j| random_initial_state(g, j as u64, 1.0)).collect();
    let back = gauge.invert(&gauge.apply(&v).unwrap()).unwrap();
    for (x, y) in back.iter().zip(&v) {
        assert!((x - y).l2_norm() < 1e-12 * y.l2_norm());
    }
}

#[test]
fn scalar_terminal_data_only() {
    let n = 4;
    let theta = n as f64 + 0.5;
    let dt = 0.01;
    let h = vec![c(0.0, 0.0); 4001];
    let sol = scalar_mode_solve(n, theta, 1.3, &h, dt, Some(c(1.0, 0.0))).unwrap();
    let expect = (1.0 - (-40.0f64).exp()).sqrt();
    assert!((sol.w_norm - expect).abs() < 1e-9, "{}", sol.w_norm);
    assert!((sol.bound - 1.0).abs() < 1e-15);
    let t = -1.0;
    let exact = (c(0.5, -1.3 * n as f64) * t).exp();
    assert!((sol.w[3900] - exact).norm() < 1e-12);
}

#[test]
fn scalar_exponential_forcing_on_high_mode() {
    let (n, lambda, omega) = (3u64, 9u64, 0.7);
    let theta = n as f64 + 0.5;
    let dt = 0.005;
    let times = window(30.0, dt);
    let h: Vec<Complex64> = times.iter().map(|&t| c(t.exp(), 0.0)).collect();
    let sol = scalar_mode_solve(lambda, theta, omega, &h, dt, None).unwrap();
    let g = lambda as f64 - theta;
    let denom = c(1.0 + g, omega * lambda as f64);
    let at_zero = sol.w.last().unwrap();
    assert!((at_zero - 1.0 / denom).norm() < 1e-5);
    assert!((sol.w_norm - sol.h_norm / denom.norm()).abs() < 1e-5);
    assert!(sol.w_norm <= sol.h_norm / g);
}

#[test]
fn scalar_zero_data_gives_zero() {
    let sol = scalar_mode_solve(12, 3.5, 2.0, &[c(0.0, 0.0); 11], 0.1, None).unwrap();
    assert!(sol.w.iter().all(|w| w.norm() == 0.0));
}

#[test]
fn scalar_preconditions() {
    let h = [c(1.0, 0.0); 5];
    assert!(scalar_mode_solve(3, 3.25, 1.0, &h, 0.1, Some(c(1.0, 0.0))).is_err());
    assert!(scalar_mode_solve(3, 3.5, 1.0, &h, 0.1, None).is_err());
    assert!(scalar_mode_solve(4, 3.5, 1.0, &h, 0.1, Some(c(1.0, 0.0))).is_err());
    assert!(scalar_mode_solve(4, 3.5, 1.0, &h[..1], 0.1, None).is_err());
}

fn band(g: GridSpec, n: u64, l: u64) -> ModeBand {
    ModeBand::from_modes(n, l, g.retained_modes()).unwrap()
}

#[test]
fn decoupled_bvp_converges_at_once() {
    let g = grid(8);
    let times = window(3.0, 0.05);
    let coeffs = constant_coeffs(g, &times, c(0.0, 0.0), c(0.0, 0.0));
    let h: Vec<SpectralField> = times
        .iter()
        .map(|&t| random_initial_state(g, 9, (0.5 * t).exp()))
        .collect();
    let v_plus = random_initial_state(g, 10, 1.0).project_low(4);
    let problem = BackwardProblem::new(coeffs, 1.1, 4, h.clone(), v_plus.clone()).unwrap();
    let outcome = backward_bvp_solve(&problem, &band(g, 4, 2), &BvpSettings::default()).unwrap();
    let BvpOutcome::Converged { w, report } = outcome else {
        panic!("decoupled problem must converge");
    };
    assert_eq!(report.iterations, 1);
    assert!(report.residual < 1e-14);
    let k = WaveVector::new(1, 1, 0);
    let series: Vec<Complex64> = h.iter().map(|f| f.get(k)).collect();
    let scalar = scalar_mode_solve(2, 4.5, 1.1, &series, 0.05, Some(v_plus.get(k))).unwrap();
    for (f, s) in w.iter().zip(&scalar.w) {
        assert!((f.get(k) - s).norm() < 1e-14);
    }
}

#[test]
fn constant_potential_shifts_the_exponent() {
    let g = grid(4);
    let dt = 0.01;
    let times = window(4.0, dt);
    let eps = 0.05;
    let coeffs = constant_coeffs(g, &times, c(eps, 0.0), c(0.0, 0.0));
    let h = vec![SpectralField::zeros(g); times.len()];
    let k = WaveVector::new(0, 1, 0);
    let v_plus = SpectralField::from_modes(g, [(k, c(1.0, 0.0))]).unwrap();
    let omega = 2.0;
    let problem = BackwardProblem::new(coeffs, omega, 2, h, v_plus).unwrap();
    let outcome = backward_bvp_solve(&problem, &band(g, 2, 1), &BvpSettings::default()).unwrap();
    let BvpOutcome::Converged { w, report } = outcome else {
        panic!("small constant potential must converge");
    };
    assert!(report.estimate.contraction_factor < 2.0 * eps + 1e-6);
    let mu = c(1.0 - 2.5 + eps, omega);
    for (f, &t) in w.iter().zip(&times) {
        // ETD2RK-style interpolation of the coupling costs O(dt²)
        assert!((f.get(k) - (-mu * t).exp()).norm() < 1e-4 * (-mu.re * t).exp());
    }
}

#[test]
fn strong_coupling_reports_divergence() {
    let g = grid(4);
    let times = window(2.0, 0.05);
    let coeffs = constant_coeffs(g, &times, c(-3.0, 0.0), c(0.0, 0.0));
    let h = vec![SpectralField::zeros(g); times.len()];
    let v_plus = SpectralField::constant(g, c(1.0, 0.0));
    let problem = BackwardProblem::new(coeffs, 1.0, 2, h, v_plus).unwrap();
    let settings = BvpSettings {
        max_iterations: 20,
        ..BvpSettings::default()
    };
    let outcome = backward_bvp_solve(&problem, &band(g, 2, 1), &settings).unwrap();
    assert!(matches!(outcome, BvpOutcome::Diverged(_)));
    assert!(!outcome.report().estimate.pass);
}

#[test]
fn terminal_data_above_n_is_rejected() {
    let g = grid(4);
    let times = window(1.0, 0.1);
    let coeffs = constant_coeffs(g, &times, c(0.0, 0.0), c(0.0, 0.0));
    let v_plus = SpectralField::from_modes(g, [(WaveVector::new(1, 1, 1), c(1.0, 0.0))]).unwrap();
    let h = vec![SpectralField::zeros(g); times.len()];
    assert!(BackwardProblem::new(coeffs, 1.0, 2, h, v_plus).is_err());
}

#[test]
fn temporal_transform_properties() {
    let times = window(5.0, 0.1);
    let series: Vec<Complex64> = times.iter().map(|&t| c(t.sin(), (2.0 * t).cos())).collect();
    let zero = vec![c(0.0, 0.0); times.len()];
    let omega_n = 3.0;
    let rot = temporal_transform(&series, &times, omega_n, &zero, TransformDirection::ZToRotating).unwrap();
    for (a, b) in rot.iter().zip(&series) {
        assert!((a.norm() - b.norm()).abs() < 1e-15);
    }
    let u = temporal_transform(&rot, &times, omega_n, &zero, TransformDirection::RotatingToU).unwrap();
    assert_eq!(u, rot);

    let beta: Vec<Complex64> = times
        .iter()
        .map(|&t| Complex64::from_polar(0.3 * 2.0 * omega_n, 0.7 * t))
        .collect();
    let u = temporal_transform(&rot, &times, omega_n, &beta, TransformDirection::RotatingToU).unwrap();
    let z = temporal_transform(&u, &times, omega_n, &beta, TransformDirection::UToRotating).unwrap();
    for (a, b) in z.iter().zip(&rot) {
        assert!((a - b).norm() < 1e-12);
    }
    let big = vec![c(2.0 * omega_n, 0.0); times.len()];
    assert!(matches!(
        temporal_transform(&rot, &times, omega_n, &big, TransformDirection::RotatingToU),
        Err(CglError::AveragingRegime { .. })
    ));
}

#[test]
fn smallness_examples() {
    let r = smallness_report(100, 2, 1.0, 1.0, 0.01).unwrap();
    assert_eq!(r.inverse_dispersion, 1.0 / 196.0);
    assert_eq!(r.gap_ratio, 5.0 / 392.0);
    assert!(r.inverse_dispersion_small && !r.gap_ratio_small);
    let doubled = smallness_report(100, 2, 2.0, 1.0, 0.01).unwrap();
    assert_eq!(doubled.inverse_dispersion, r.inverse_dispersion / 2.0);
    assert_eq!(doubled.gap_ratio, r.gap_ratio / 2.0);
    assert!(smallness_report(2, 2, 1.0, 1.0, 0.01).is_err());
    assert!(smallness_report(5, 2, 0.0, 1.0, 0.01).is_err());
}

#[test]
fn minimal_n_scan_matches_closed_form() {
    // K(2L+1)/(4ω(N−L)) < ε  ⇔  N > L + K(2L+1)/(4ωε) = 2 + 125
    let n = minimal_passing_n(2, 1.0, 1.0, 0.01, 1000).unwrap();
    assert_eq!(n, Some(128));
    assert_eq!(minimal_passing_n(2, 1.0, 1.0, 0.01, 100).unwrap(), None);
}

#[test]
fn lipschitz_on_single_decaying_mode() {
    let p = CglParams::new(1.0, NonlinearitySpec::Zero, grid(8), 0.01).unwrap();
    let k = WaveVector::new(1, 1, 0);
    let psi = SpectralField::from_modes(p.grid, [(k, c(1.0, 0.5))]).unwrap();
    let first = simulate(&p, &psi, 10.0).unwrap();
    let second = simulate(&p, &SpectralField::zeros(p.grid), 10.0).unwrap();
    let m = measure_backward_lipschitz(&first, &second, 3, &LipschitzSettings::default()).unwrap();
    let LipschitzMeasurement::Estimate(r) = m else {
        panic!("a low-mode difference is visible to P_N");
    };
    assert!((r.c_measured - 1.0).abs() < 1e-12);
    assert!((r.theta_measured - 2.0).abs() < 0.02);
    assert!(r.pass);

    let high = SpectralField::from_modes(p.grid, [(WaveVector::new(2, 1, 0), c(1.0, 0.0))]).unwrap();
    let first = simulate(&p, &high, 1.0).unwrap();
    let second = simulate(&p, &SpectralField::zeros(p.grid), 1.0).unwrap();
    let m = measure_backward_lipschitz(&first, &second, 3, &LipschitzSettings::default()).unwrap();
    assert!(matches!(m, LipschitzMeasurement::InjectivityFailure { .. }));
    assert!(measure_backward_lipschitz(&first, &first, 3, &LipschitzSettings::default()).is_err());
}

#[test]
fn estimate_report_serializes_infinite_bound_as_null() {
    let r = EstimateReport {
        c_measured: 1.0,
        theta_measured: 2.5,
        bound_c: f64::INFINITY,
        bound_theta: 2.5,
        contraction_factor: 0.0,
        pass: false,
    };
    let text = serde_json::to_string(&r).unwrap();
    assert!(text.contains("\"bound_C\":null"));
    assert_eq!(serde_json::from_str::<EstimateReport>(&text).unwrap(), r);
}
