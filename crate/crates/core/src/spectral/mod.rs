//! Complex fields on the periodic grid over `(-π, π)³`.
//!
//! Coefficients follow `Ψ(x) = Σ_k Ψ̂(k) e^{i k·x}`, so the spatial mean
//! `⟨Ψ⟩ = (2π)^{-3} ∫ Ψ dx` is exactly `Ψ̂(0)` and the physical `L²` norm
//! is `(2π)^{3/2}` times the `ℓ²` norm of the coefficients. Grid points sit
//! at `x_j = -π + 2πj/M`.

mod fft;
mod nonlinearity;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CglError, Result};
use crate::lattice::WaveVector;

pub use nonlinearity::NonlinearitySpec;

use fft::{fft3, Direction};

/// `(2π)^{3/2}`, the factor between coefficient `ℓ²` and physical `L²` norms.
pub fn volume_sqrt() -> f64 {
    (2.0 * PI).powf(1.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GridSpec {
    m: usize,
}

impl TryFrom<usize> for GridSpec {
    type Error = CglError;
    fn try_from(m: usize) -> Result<Self> {
        GridSpec::new(m)
    }
}

impl From<GridSpec> for usize {
    fn from(g: GridSpec) -> usize {
        g.m
    }
}

impl GridSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || m % 2 != 0 {
            return Err(CglError::invalid(format!(
                "grid size must be even and at least 4, got {m}"
            )));
        }
        Ok(GridSpec { m })
    }

    /// Points per axis.
    pub fn size(&self) -> usize {
        self.m
    }

    /// Total number of grid points (and coefficients).
    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -PI + 2.0 * PI * j as f64 / self.m as f64
    }

    fn wavenumber(&self, i: usize) -> i32 {
        if i < self.m / 2 {
            i as i32
        } else {
            i as i32 - self.m as i32
        }
    }

    fn axis_index(&self, k: i32) -> Option<usize> {
        let half = (self.m / 2) as i32;
        if k < -half || k >= half {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.m as i32) as usize)
        }
    }

    /// Storage index of `k`, or `None` if `k` is not representable.
    pub fn index_of(&self, k: WaveVector) -> Option<usize> {
        let a = self.axis_index(k.k1)?;
        let b = self.axis_index(k.k2)?;
        let c = self.axis_index(k.k3)?;
        Some((a * self.m + b) * self.m + c)
    }

    pub fn wavevector(&self, idx: usize) -> WaveVector {
        let m = self.m;
        WaveVector::new(
            self.wavenumber(idx / (m * m)),
            self.wavenumber((idx / m) % m),
            self.wavenumber(idx % m),
        )
    }

    /// Largest `|k_i|` kept by the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> i32 {
        (self.m / 3) as i32
    }

    pub fn is_retained(&self, k: WaveVector) -> bool {
        k.max_abs() <= self.dealias_cutoff()
    }

    /// Dealiased modes in lexicographic order.
    pub fn retained_modes(&self) -> Vec<WaveVector> {
        let c = self.dealias_cutoff();
        let mut out = Vec::with_capacity(((2 * c + 1) as usize).pow(3));
        for a in -c..=c {
            for b in -c..=c {
                for d in -c..=c {
                    out.push(WaveVector::new(a, b, d));
                }
            }
        }
        out
    }

    /// Every representable mode in lexicographic order (`-M/2 ..= M/2-1`
    /// per axis); this is the on-disk coefficient order.
    pub fn lexicographic_modes(&self) -> Vec<WaveVector> {
        let half = (self.m / 2) as i32;
        let mut out = Vec::with_capacity(self.len());
        for a in -half..half {
            for b in -half..half {
                for d in -half..half {
                    out.push(WaveVector::new(a, b, d));
                }
            }
        }
        out
    }
}

/// Samples `Ψ(x_j)` on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl PhysicalField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CglError::SizeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(PhysicalField { grid, values })
    }

    /// Samples `f(x1, x2, x3)` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64, f64) -> Complex64) -> Self {
        let m = grid.size();
        let mut values = Vec::with_capacity(grid.len());
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    values.push(f(grid.coordinate(a), grid.coordinate(b), grid.coordinate(c)));
                }
            }
        }
        PhysicalField { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn to_spectral(&self) -> SpectralField {
        let mut data = self.values.clone();
        let m = self.grid.size();
        fft3(&mut data, m, Direction::Forward);
        let scale = 1.0 / self.grid.len() as f64;
        apply_parity(&mut data, m, scale);
        SpectralField {
            grid: self.grid,
            coeffs: data,
        }
    }
}

/// Multiplies entry `(i1,i2,i3)` by `scale · (-1)^{i1+i2+i3}`, the phase of
/// shifting the grid origin to `-π`.
fn apply_parity(data: &mut [Complex64], m: usize, scale: f64) {
    for (idx, v) in data.iter_mut().enumerate() {
        let parity = idx / (m * m) + (idx / m) % m + idx % m;
        *v *= if parity % 2 == 0 { scale } else { -scale };
    }
}

/// Truncated Fourier coefficients on a grid, stored in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    /// Wraps coefficients given in internal (FFT) order.
    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(CglError::SizeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn from_modes(
        grid: GridSpec,
        modes: impl IntoIterator<Item = (WaveVector, Complex64)>,
    ) -> Result<Self> {
        let mut f = SpectralField::zeros(grid);
        for (k, c) in modes {
            let idx = grid
                .index_of(k)
                .ok_or_else(|| CglError::invalid(format!("mode {k:?} not on grid {}", grid.m)))?;
            f.coeffs[idx] += c;
        }
        Ok(f)
    }

    pub fn constant(grid: GridSpec, c: Complex64) -> Self {
        let mut f = SpectralField::zeros(grid);
        f.coeffs[0] = c;
        f
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, k: WaveVector) -> Complex64 {
        self.grid
            .index_of(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    pub fn set(&mut self, k: WaveVector, c: Complex64) -> Result<()> {
        let idx = self
            .grid
            .index_of(k)
            .ok_or_else(|| CglError::invalid(format!("mode {k:?} not on grid")))?;
        self.coeffs[idx] = c;
        Ok(())
    }

    /// `(k, Ψ̂(k))` over all grid modes in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (WaveVector, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.grid.wavevector(i), *c))
    }

    /// Coefficients in lexicographic wavevector order.
    pub fn lexicographic_coeffs(&self) -> Vec<Complex64> {
        self.grid
            .lexicographic_modes()
            .into_iter()
            .map(|k| self.get(k))
            .collect()
    }

    pub fn from_lexicographic(grid: GridSpec, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(CglError::SizeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        let mut f = SpectralField::zeros(grid);
        for (k, c) in grid.lexicographic_modes().into_iter().zip(coeffs) {
            let idx = grid.index_of(k).expect("lexicographic modes lie on the grid");
            f.coeffs[idx] = *c;
        }
        Ok(f)
    }

    pub fn to_physical(&self) -> PhysicalField {
        let mut data = self.coeffs.clone();
        let m = self.grid.size();
        apply_parity(&mut data, m, 1.0);
        fft3(&mut data, m, Direction::Inverse);
        PhysicalField {
            grid: self.grid,
            values: data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `⟨Ψ⟩ = (2π)^{-3} ∫ Ψ dx`.
    pub fn spatial_average(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// `factor · Δ` applied spectrally: the coefficient at `k` is multiplied
    /// by `-factor · |k|²`.
    pub fn apply_laplacian(&self, factor: Complex64) -> SpectralField {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let lam = self.grid.wavevector(i).eigenvalue() as f64;
            *c *= -factor * lam;
        }
        out
    }

    /// Orthogonal projection onto the span of `modes`; modes off the grid
    /// are ignored.
    pub fn project(&self, modes: &[WaveVector]) -> SpectralField {
        let mut out = SpectralField::zeros(self.grid);
        for &k in modes {
            if let Some(i) = self.grid.index_of(k) {
                out.coeffs[i] = self.coeffs[i];
            }
        }
        out
    }

    pub fn project_where(&self, keep: impl Fn(WaveVector) -> bool) -> SpectralField {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if !keep(self.grid.wavevector(i)) {
                *c = Complex64::default();
            }
        }
        out
    }

    /// Spectral projector `P_N` onto modes with `λ ≤ N`.
    pub fn project_low(&self, n: u64) -> SpectralField {
        self.project_where(|k| k.eigenvalue() <= n)
    }

    /// Zeroes every mode outside the 2/3-rule set.
    pub fn dealias(&self) -> SpectralField {
        let grid = self.grid;
        self.project_where(|k| grid.is_retained(k))
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    /// `(2π)^{3/2} (Σ_k (1 + |k|²)^s |Ψ̂(k)|²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let sum: f64 = if s == 0.0 {
            self.coeffs.iter().map(|c| c.norm_sqr()).sum()
        } else {
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let lam = self.grid.wavevector(i).eigenvalue() as f64;
                    (1.0 + lam).powf(s) * c.norm_sqr()
                })
                .sum()
        };
        volume_sqrt() * sum.sqrt()
    }

    /// Coefficient-space `ℓ²` pairing `Σ conj(a_k) b_k`.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, c: Complex64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    pub fn axpy(&mut self, alpha: Complex64, x: &SpectralField) {
        debug_assert_eq!(self.grid, x.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *a += alpha * b;
        }
    }

    /// Pseudospectral evaluation of `f(Ψ, Ψ̄)`, dealiased by the 2/3 rule.
    pub fn nonlinearity_eval(&self, f: &NonlinearitySpec) -> Result<SpectralField> {
        if !self.is_finite() {
            return Err(CglError::NonFinite {
                context: "nonlinearity input".into(),
            });
        }
        let out = match f {
            NonlinearitySpec::Zero => SpectralField::zeros(self.grid),
            NonlinearitySpec::Linear { c } => self.scale(*c).dealias(),
            _ => {
                let mut phys = self.to_physical();
                for v in phys.values.iter_mut() {
                    *v = f.eval(*v);
                }
                phys.to_spectral().dealias()
            }
        };
        if !out.is_finite() {
            return Err(CglError::NonFinite {
                context: "nonlinearity output".into(),
            });
        }
        Ok(out)
    }
}

impl std::ops::Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.grid, rhs.grid);
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl std::ops::Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.grid, rhs.grid);
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}
