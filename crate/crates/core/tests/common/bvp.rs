//! Backward boundary-value scenarios shared by several test targets.

use cgl_core::lattice::{search_separated_n, ModeBand};
use cgl_core::spectral::{GridSpec, PhysicalField, SpectralField};
use cgl_core::variational::{
    backward_bvp_solve, BackwardProblem, BvpOutcome, BvpReport, BvpSettings, VariationalCoefficients,
};
use num_complex::Complex64;

use super::{c, random_band_field, rng, DenseBvp};

pub fn uniform_times(horizon: f64, steps: usize) -> Vec<f64> {
    let dt = horizon / steps as f64;
    (0..=steps).map(|j| -horizon + j as f64 * dt).collect()
}

fn low_terminal(grid: GridSpec, n: u64, seed: u64) -> SpectralField {
    let mut r = rng(seed);
    random_band_field(grid, grid.dealias_cutoff(), 1.0, &mut r).project_where(|k| k.eigenvalue() <= n)
}

pub fn solve(problem: &BackwardProblem, band: &ModeBand) -> (Vec<SpectralField>, BvpReport) {
    match backward_bvp_solve(problem, band, &BvpSettings::default()).unwrap() {
        BvpOutcome::Converged { w, report } => (w, report),
        BvpOutcome::Diverged(report) => panic!("no convergence: {report:?}"),
    }
}

/// Largest relative deviation from the dense two-point solution on a 4³
/// grid with time-constant data, sampled at five times.
pub fn dense_agreement(steps: usize) -> f64 {
    let grid = GridSpec::new(4).unwrap();
    let (n, horizon, omega) = (2, 4.0, 1.0);
    let mut r = rng(41);
    let a = random_band_field(grid, 1, 0.01, &mut r);
    let b = random_band_field(grid, 1, 0.01, &mut r);
    let h = random_band_field(grid, 1, 1.0, &mut r);
    let v_plus = low_terminal(grid, n, 42);

    let times = uniform_times(horizon, steps);
    let len = times.len();
    let coeffs = VariationalCoefficients::new(times.clone(), vec![a.clone(); len], vec![b.clone(); len]).unwrap();
    let problem = BackwardProblem::new(coeffs, omega, n, vec![h.clone(); len], v_plus.clone()).unwrap();
    let band = ModeBand::from_modes(n, 1, grid.retained_modes()).unwrap();
    let (w, _) = solve(&problem, &band);

    let dense = DenseBvp::new(grid, &a, &b, omega, n, &h, &v_plus, horizon);
    let mut worst = 0.0f64;
    for j in [0, steps / 4, steps / 2, 3 * steps / 4, steps] {
        let exact = dense.at(grid, times[j]);
        worst = worst.max((&w[j] - &exact).l2_norm() / exact.l2_norm());
    }
    worst
}

/// Smooth time-dependent coefficients scaled to `K = k_target`.
pub fn smooth_coefficients(grid: GridSpec, times: &[f64], k_target: f64) -> VariationalCoefficients {
    let field = |t: f64, phase: f64| {
        PhysicalField::from_fn(grid, move |x, y, z| {
            c(x.cos() + 0.5 * (y + 0.3 * t).sin(), 0.7 * (z - x + phase).cos() * (0.2 * t).cos())
        })
        .to_spectral()
        .dealias()
    };
    let build = |scale: f64| {
        let a = times.iter().map(|&t| field(t, 0.0).scale(c(scale, 0.0))).collect();
        let b = times.iter().map(|&t| field(t, 1.0).scale(c(0.0, scale))).collect();
        VariationalCoefficients::new(times.to_vec(), a, b).unwrap()
    };
    let unit = build(1.0);
    build(k_target / unit.k_bound)
}

/// 8³ grid, `K = 0.1`, `L = 2` and the first separated `N`.
pub fn certified_problem(horizon: f64, dt: f64) -> (BackwardProblem, ModeBand) {
    let grid = GridSpec::new(8).unwrap();
    let l = 2;
    let n = search_separated_n(l, 0.5, 3, 12).unwrap()[0];
    let steps = (horizon / dt).round() as usize;
    let times = uniform_times(horizon, steps);
    let coeffs = smooth_coefficients(grid, &times, 0.1);
    let mut r = rng(7);
    let base = random_band_field(grid, 2, 0.1, &mut r);
    let h = times
        .iter()
        .map(|&t| base.scale(Complex64::from_polar(1.0, 0.4 * t)))
        .collect();
    let v_plus = low_terminal(grid, n, 8);
    let band = ModeBand::from_modes(n, l, grid.retained_modes()).unwrap();
    (BackwardProblem::new(coeffs, 1.0, n, h, v_plus).unwrap(), band)
}

/// Relative change of the solution on `[−1, 0]` when the window doubles
/// from 40 to 80.
pub fn doubling_change() -> f64 {
    let dt = 0.02;
    let (short, band) = certified_problem(40.0, dt);
    let (long, _) = certified_problem(80.0, dt);
    let (ws, _) = solve(&short, &band);
    let (wl, _) = solve(&long, &band);
    let near = (1.0 / dt).round() as usize;
    let mut worst = 0.0f64;
    for j in 0..=near {
        let a = &ws[ws.len() - 1 - j];
        let b = &wl[wl.len() - 1 - j];
        worst = worst.max((a - b).l2_norm() / a.l2_norm());
    }
    worst
}
