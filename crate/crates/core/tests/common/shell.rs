//! Brute-force shell enumeration and dense multiplier norms.

use cgl_core::lattice::{PhiSpectrum, WaveVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::random_complex;

/// Every integer point with `|λ − N| ≤ L`, by scanning a cube.
pub fn naive_shell(n: u64, l: u64) -> Vec<WaveVector> {
    let r = ((n + l) as f64).sqrt().ceil() as i32;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for d in -r..=r {
                let lam = (a * a + b * b + d * d) as u64;
                if lam + l >= n && lam <= n + l {
                    out.push(WaveVector::new(a, b, d));
                }
            }
        }
    }
    out.sort();
    out
}

/// Random `φ̂` on `|k_i| ≤ truncation`, each wavevector kept with
/// probability `density`.
pub fn random_phi(rng: &mut ChaCha8Rng, truncation: i32, density: f64) -> PhiSpectrum {
    let t = truncation;
    let mut entries = Vec::new();
    for a in -t..=t {
        for b in -t..=t {
            for d in -t..=t {
                if rng.gen_bool(density) {
                    entries.push((WaveVector::new(a, b, d), random_complex(rng)));
                }
            }
        }
    }
    PhiSpectrum::new(t, entries).unwrap()
}

/// Spectral norm of `(φ̂(k − m))` over the shell with the diagonal removed.
pub fn dense_norm(phi: &PhiSpectrum, shell: &[WaveVector]) -> f64 {
    if shell.is_empty() {
        return 0.0;
    }
    coupling_matrix(phi, shell).singular_values().max()
}

/// Coupling matrix `(φ̂(k_i − k_j))` over the shell with the diagonal removed.
pub fn coupling_matrix(phi: &PhiSpectrum, shell: &[WaveVector]) -> DMatrix<Complex64> {
    DMatrix::from_fn(shell.len(), shell.len(), |i, j| {
        if i == j {
            Complex64::default()
        } else {
            phi.get(shell[i] - shell[j])
        }
    })
}

/// Largest singular value by Lanczos on `M*M` with full reorthogonalization,
/// never forming `M*M`. Stops once the top Ritz pair has a negligible
/// residual.
pub fn lanczos_norm(m: &DMatrix<Complex64>, max_steps: usize) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let steps = max_steps.min(n);
    let mut v = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.618).fract(), 0.0));
    v /= Complex64::from(v.norm());
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(steps);
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    let mut top = 0.0f64;
    for j in 0..steps {
        let mut w = m.ad_mul(&(m * &v));
        let a = v.dotc(&w).re;
        w.axpy(Complex64::from(-a), &v, Complex64::from(1.0));
        if let Some(prev) = basis.last() {
            w.axpy(Complex64::from(-beta[j - 1]), prev, Complex64::from(1.0));
        }
        for q in basis.iter().chain(std::iter::once(&v)) {
            let proj = q.dotc(&w);
            w.axpy(-proj, q, Complex64::from(1.0));
        }
        alpha.push(a);
        basis.push(v.clone());
        let b = w.norm();
        let t = DMatrix::<f64>::from_fn(j + 1, j + 1, |r, c| match r.abs_diff(c) {
            0 => alpha[r],
            1 => beta[r.min(c)],
            _ => 0.0,
        });
        let eig = t.symmetric_eigen();
        let (at, &next) = eig.eigenvalues.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap();
        top = next;
        // Residual of the top Ritz pair is `b · |last component|`.
        let residual = b * eig.eigenvectors[(j, at)].abs();
        if b <= 1e-13 * top.max(f64::MIN_POSITIVE) || residual <= 1e-12 * top {
            break;
        }
        beta.push(b);
        v = w / Complex64::from(b);
    }
    top.max(0.0).sqrt()
}
