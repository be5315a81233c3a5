//! Shared helpers for the integration tests.
#![allow(dead_code)]

use cgl_core::lattice::WaveVector;
use cgl_core::spectral::{GridSpec, SpectralField};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod bvp;
pub mod flows;
pub mod graph;
pub mod shell;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex entries with independent uniform parts in `[−1, 1]`.
pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Field with random coefficients of size `scale` on `|k_i| ≤ reach`.
pub fn random_band_field(grid: GridSpec, reach: i32, scale: f64, rng: &mut ChaCha8Rng) -> SpectralField {
    let mut out = SpectralField::zeros(grid);
    for a in -reach..=reach {
        for b in -reach..=reach {
            for d in -reach..=reach {
                out.set(WaveVector::new(a, b, d), random_complex(rng) * scale).unwrap();
            }
        }
    }
    out
}

/// Continuous two-point problem
///
/// `w' + (λ − θ + iωλ) w + a w + b w̄ = h` on `[−T, 0]` with time-constant
/// `a`, `b`, `h`, low modes (`λ ≤ N`) pinned to `v⁺` at `t = 0` and high
/// modes vanishing at `t = −T`, solved with dense real matrices.
pub struct DenseBvp {
    modes: Vec<WaveVector>,
    /// `w' = −A w + h` in real coordinates.
    a: DMatrix<f64>,
    particular: DVector<f64>,
    start: DVector<f64>,
    horizon: f64,
}

impl DenseBvp {
    pub fn new(
        grid: GridSpec,
        a: &SpectralField,
        b: &SpectralField,
        omega: f64,
        n: u64,
        h: &SpectralField,
        v_plus: &SpectralField,
        horizon: f64,
    ) -> Self {
        let modes = grid.retained_modes();
        let dim = 2 * modes.len();
        let theta = n as f64 + 0.5;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (row, &k) in modes.iter().enumerate() {
            let lam = k.eigenvalue() as f64;
            add_complex(&mut m, row, row, c(lam - theta, omega * lam));
            for (col, &q) in modes.iter().enumerate() {
                // (a w)_k = Σ â(k−q) ŵ(q), (b w̄)_k = Σ b̂(k+q) conj ŵ(q)
                add_complex(&mut m, row, col, coefficient(a, k - q));
                add_conjugate(&mut m, row, col, coefficient(b, k + q));
            }
        }
        let hr = real_vector(&modes, h);
        let particular = m.clone().lu().solve(&hr).expect("steady state exists");
        let e = (-&m * horizon).exp();
        let low: Vec<usize> = modes
            .iter()
            .enumerate()
            .filter(|(_, k)| k.eigenvalue() <= n)
            .flat_map(|(i, _)| [2 * i, 2 * i + 1])
            .collect();
        let target = real_vector(&modes, v_plus);
        let shifted = &particular - &e * &particular;
        let mut lhs = DMatrix::<f64>::zeros(low.len(), low.len());
        let mut rhs = DVector::<f64>::zeros(low.len());
        for (r, &i) in low.iter().enumerate() {
            rhs[r] = target[i] - shifted[i];
            for (s, &j) in low.iter().enumerate() {
                lhs[(r, s)] = e[(i, j)];
            }
        }
        let y_low = lhs.lu().solve(&rhs).expect("low-mode block is invertible");
        let mut start = DVector::<f64>::zeros(dim);
        for (r, &i) in low.iter().enumerate() {
            start[i] = y_low[r];
        }
        DenseBvp {
            modes,
            a: m,
            particular,
            start,
            horizon,
        }
    }

    /// Solution at time `t ∈ [−T, 0]`.
    pub fn at(&self, grid: GridSpec, t: f64) -> SpectralField {
        let e = (-&self.a * (t + self.horizon)).exp();
        let v = &self.particular + e * (&self.start - &self.particular);
        SpectralField::from_modes(
            grid,
            self.modes
                .iter()
                .enumerate()
                .map(|(i, &k)| (k, c(v[2 * i], v[2 * i + 1]))),
        )
        .unwrap()
    }
}

fn coefficient(f: &SpectralField, k: WaveVector) -> Complex64 {
    let reach = f.grid().dealias_cutoff();
    if k.max_abs() > reach {
        Complex64::default()
    } else {
        f.get(k)
    }
}

fn add_complex(m: &mut DMatrix<f64>, row: usize, col: usize, z: Complex64) {
    m[(2 * row, 2 * col)] += z.re;
    m[(2 * row, 2 * col + 1)] -= z.im;
    m[(2 * row + 1, 2 * col)] += z.im;
    m[(2 * row + 1, 2 * col + 1)] += z.re;
}

/// Adds the real-linear map `x ↦ z·x̄`.
fn add_conjugate(m: &mut DMatrix<f64>, row: usize, col: usize, z: Complex64) {
    m[(2 * row, 2 * col)] += z.re;
    m[(2 * row, 2 * col + 1)] += z.im;
    m[(2 * row + 1, 2 * col)] += z.im;
    m[(2 * row + 1, 2 * col + 1)] -= z.re;
}

fn real_vector(modes: &[WaveVector], f: &SpectralField) -> DVector<f64> {
    let mut v = DVector::zeros(2 * modes.len());
    for (i, &k) in modes.iter().enumerate() {
        let z = f.get(k);
        v[2 * i] = z.re;
        v[2 * i + 1] = z.im;
    }
    v
}
