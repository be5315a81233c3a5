//! Closed-form solutions used as oracles for the integrator.

use cgl_core::dynamics::{random_initial_state, simulate, simulate_with_cadence, CglParams};
use cgl_core::spectral::{GridSpec, NonlinearitySpec, SpectralField};
use num_complex::Complex64;

use super::c;

/// Largest coefficient deviation of a linear (`f ≡ 0`) run from
/// `e^{−(1+iω)λt} Ψ̂₀(k)` over every stored time.
pub fn linear_propagator_error(m: usize, omega: f64, dt: f64, horizon: f64) -> f64 {
    let grid = GridSpec::new(m).unwrap();
    let params = CglParams::new(omega, NonlinearitySpec::Zero, grid, dt).unwrap();
    let psi0 = random_initial_state(grid, 5, 1.0);
    let traj = simulate(&params, &psi0, horizon).unwrap();
    let mut worst = 0.0f64;
    for (&t, state) in traj.times.iter().zip(&traj.states) {
        for (k, z0) in psi0.modes() {
            let lam = k.eigenvalue() as f64;
            let exact = z0 * (-c(1.0, omega) * lam * t).exp();
            worst = worst.max((state.get(k) - exact).norm());
        }
    }
    worst
}

/// Relative `L²` distance at `t = horizon` between the run from `Ψ₀ ≡ 1`
/// and the rotating wave `e^{i(β−δ)t}`.
pub fn rotating_wave_error(m: usize, beta: f64, delta: f64, dt: f64, horizon: f64) -> f64 {
    let grid = GridSpec::new(m).unwrap();
    let params = CglParams::cubic(1.0, beta, delta, grid, dt).unwrap();
    let one = SpectralField::constant(grid, c(1.0, 0.0));
    let traj = simulate_with_cadence(&params, &one, horizon, usize::MAX).unwrap();
    let exact = one.scale(Complex64::from_polar(1.0, (beta - delta) * horizon));
    (traj.last() - &exact).l2_norm() / exact.l2_norm()
}
