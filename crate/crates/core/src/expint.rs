//! `φ`-functions of exponential integrators.
//!
//! `φ1(z) = (e^z − 1)/z` and `φ2(z) = (e^z − 1 − z)/z²`, evaluated by
//! Taylor series near the origin where the closed forms cancel.

use num_complex::Complex64;

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 24;

/// `Σ_{n≥0} z^n / (n + p)!`, which equals `φ_p(z)`.
fn phi_series(z: Complex64, p: usize) -> Complex64 {
    let mut fact = 1.0;
    for j in 2..=p {
        fact *= j as f64;
    }
    let mut term = Complex64::new(1.0 / fact, 0.0);
    let mut sum = term;
    for n in 1..SERIES_TERMS {
        term *= z / (n + p) as f64;
        sum += term;
    }
    sum
}

pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        phi_series(z, 1)
    } else {
        (z.exp() - 1.0) / z
    }
}

pub fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        phi_series(z, 2)
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

/// Weights `(w_start, w_end)` with
/// `∫_0^Δ e^{μ(Δ−s)} g(s) ds = w_start·g(0) + w_end·g(Δ)` for `g` linear on
/// `[0, Δ]`.
pub fn linear_forcing_weights(mu: Complex64, step: f64) -> (Complex64, Complex64) {
    let z = mu * step;
    let p1 = phi1(z);
    let p2 = phi2(z);
    (step * (p1 - p2), step * p2)
}
