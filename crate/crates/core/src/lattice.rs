//! Integer lattice of Laplacian eigenmodes on the 3-torus.
//!
//! Wavevectors `k ∈ ℤ³` index the Fourier modes `e^{i k·x}`; the
//! eigenvalue of `-Δ` on mode `k` is `|k|²`. This module builds the
//! low / intermediate / high mode bands around a cutoff `N`, enumerates
//! spherical shells of lattice points and produces separation and
//! operator-norm certificates for multiplication operators restricted to
//! a shell.

use std::collections::{BTreeMap, HashSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CglError, Result};

/// Fourier index of a mode on the 3-torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector {
    pub k1: i32,
    pub k2: i32,
    pub k3: i32,
}

impl WaveVector {
    pub const ZERO: WaveVector = WaveVector { k1: 0, k2: 0, k3: 0 };

    pub const fn new(k1: i32, k2: i32, k3: i32) -> Self {
        WaveVector { k1, k2, k3 }
    }

    pub fn eigenvalue(self) -> u64 {
        eigenvalue(self)
    }

    pub fn max_abs(self) -> i32 {
        self.k1.abs().max(self.k2.abs()).max(self.k3.abs())
    }

    pub fn dist(self, other: WaveVector) -> f64 {
        ((self - other).eigenvalue() as f64).sqrt()
    }
}

impl std::ops::Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, rhs: WaveVector) -> WaveVector {
        WaveVector::new(self.k1 - rhs.k1, self.k2 - rhs.k2, self.k3 - rhs.k3)
    }
}

impl std::ops::Add for WaveVector {
    type Output = WaveVector;
    fn add(self, rhs: WaveVector) -> WaveVector {
        WaveVector::new(self.k1 + rhs.k1, self.k2 + rhs.k2, self.k3 + rhs.k3)
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector::new(-self.k1, -self.k2, -self.k3)
    }
}

impl From<[i32; 3]> for WaveVector {
    fn from(k: [i32; 3]) -> Self {
        WaveVector::new(k[0], k[1], k[2])
    }
}

/// Eigenvalue of `-Δ` with periodic boundary conditions on `(-π, π)³`.
pub fn eigenvalue(k: WaveVector) -> u64 {
    let sq = |v: i32| (v as i64 * v as i64) as u64;
    sq(k.k1) + sq(k.k2) + sq(k.k3)
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All lattice points with `lo <= |k|² <= hi`, in lexicographic order.
pub fn enumerate_band(lo: u64, hi: u64) -> Vec<WaveVector> {
    let mut out = Vec::new();
    if lo > hi {
        return out;
    }
    let r = isqrt(hi) as i32;
    for k1 in -r..=r {
        let s1 = (k1 as i64 * k1 as i64) as u64;
        let rem1 = hi - s1;
        let r2 = isqrt(rem1) as i32;
        for k2 in -r2..=r2 {
            let s2 = s1 + (k2 as i64 * k2 as i64) as u64;
            let top = isqrt(hi - s2) as i32;
            // smallest |k3| with s2 + k3² >= lo
            let need = lo.saturating_sub(s2);
            let mut bottom = isqrt(need) as i32;
            if (bottom as u64) * (bottom as u64) < need {
                bottom += 1;
            }
            if bottom > top {
                continue;
            }
            for k3 in -top..=-bottom.max(1) {
                out.push(WaveVector::new(k1, k2, k3));
            }
            if bottom == 0 {
                out.push(WaveVector::new(k1, k2, 0));
            }
            for k3 in bottom.max(1)..=top {
                out.push(WaveVector::new(k1, k2, k3));
            }
        }
    }
    out
}

/// Intermediate shell `{k : N−L ≤ |k|² ≤ N+L}` in lexicographic order.
///
/// `L = 0` is accepted and yields the single sphere `|k|² = N`.
pub fn enumerate_shell(n: u64, l: u64) -> Result<Vec<WaveVector>> {
    if l >= n {
        return Err(CglError::invalid(format!(
            "shell half-width L = {l} must be smaller than N = {n}"
        )));
    }
    Ok(enumerate_band(n - l, n + l))
}

/// Partition of a retained mode set into the bands below, inside and above
/// the intermediate shell `[N−L, N+L]`.
#[derive(Clone, Debug)]
pub struct ModeBand {
    pub n: u64,
    pub l: u64,
    pub low: Vec<WaveVector>,
    pub intermediate: Vec<WaveVector>,
    pub high: Vec<WaveVector>,
}

impl ModeBand {
    pub fn from_modes(n: u64, l: u64, modes: impl IntoIterator<Item = WaveVector>) -> Result<Self> {
        if l == 0 || l >= n {
            return Err(CglError::invalid(format!(
                "mode band requires 0 < L < N, got N = {n}, L = {l}"
            )));
        }
        let mut modes: Vec<WaveVector> = modes.into_iter().collect();
        modes.sort_unstable();
        modes.dedup();
        let mut band = ModeBand {
            n,
            l,
            low: Vec::new(),
            intermediate: Vec::new(),
            high: Vec::new(),
        };
        for k in modes {
            let lam = k.eigenvalue();
            if lam + l < n {
                band.low.push(k);
            } else if lam <= n + l {
                band.intermediate.push(k);
            } else {
                band.high.push(k);
            }
        }
        Ok(band)
    }

    /// Modes `λ ≤ N`, the range of the spectral projector `P_N`.
    pub fn spectral_low(&self) -> Vec<WaveVector> {
        self.low
            .iter()
            .chain(self.intermediate.iter())
            .copied()
            .filter(|k| k.eigenvalue() <= self.n)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.low.len() + self.intermediate.len() + self.high.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Minimum Euclidean distance between distinct points; `+∞` for fewer
/// than two points.
pub fn min_pair_separation(shell: &[WaveVector]) -> f64 {
    let mut best = u64::MAX;
    for (i, &a) in shell.iter().enumerate() {
        for &b in &shell[i + 1..] {
            if a == b {
                continue;
            }
            let d2 = (a - b).eigenvalue();
            if d2 < best {
                best = d2;
                if best == 1 {
                    return 1.0;
                }
            }
        }
    }
    if best == u64::MAX {
        f64::INFINITY
    } else {
        (best as f64).sqrt()
    }
}

/// Nonzero offsets `d` with `|d| <= rho`.
fn offsets_within(rho: f64) -> Vec<WaveVector> {
    let r2 = (rho * rho).floor().max(0.0) as u64;
    if r2 == 0 {
        return Vec::new();
    }
    enumerate_band(1, r2)
}

fn separated_beyond(shell: &[WaveVector], offsets: &[WaveVector]) -> bool {
    let set: HashSet<WaveVector> = shell.iter().copied().collect();
    !shell
        .iter()
        .any(|&k| offsets.iter().any(|&d| set.contains(&(k + d))))
}

/// All `N` in `[n_min, n_max]` whose shell `(N, L)` has minimum pair
/// separation strictly greater than `rho`, in increasing order.
pub fn search_separated_n(l: u64, rho: f64, n_min: u64, n_max: u64) -> Result<Vec<u64>> {
    if n_min <= l {
        return Err(CglError::invalid(format!(
            "search range must start above L: n_min = {n_min}, L = {l}"
        )));
    }
    if n_max < n_min {
        return Err(CglError::invalid(format!(
            "empty search range [{n_min}, {n_max}]"
        )));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(CglError::invalid(format!("rho must be positive, got {rho}")));
    }
    let offsets = offsets_within(rho);
    let passing: Vec<u64> = (n_min..=n_max)
        .into_par_iter()
        .filter(|&n| {
            let shell = enumerate_band(n - l, n + l);
            separated_beyond(&shell, &offsets)
        })
        .collect();
    Ok(passing)
}

/// Finitely supported Fourier data `φ̂` of a multiplier `φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiSpectrum {
    truncation: i32,
    coeffs: BTreeMap<WaveVector, Complex64>,
}

impl PhiSpectrum {
    /// Builds the spectrum, rejecting entries with `|k_i| > truncation`.
    pub fn new(
        truncation: i32,
        entries: impl IntoIterator<Item = (WaveVector, Complex64)>,
    ) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (k, c) in entries {
            if k.max_abs() > truncation {
                return Err(CglError::SupportExceedsTruncation {
                    truncation,
                    k1: k.k1,
                    k2: k.k2,
                    k3: k.k3,
                });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(CglError::NonFinite {
                    context: format!("phi coefficient at {k:?}"),
                });
            }
            *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(PhiSpectrum { truncation, coeffs })
    }

    pub fn truncation(&self) -> i32 {
        self.truncation
    }

    pub fn get(&self, k: WaveVector) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    /// Spatial mean `⟨φ⟩ = φ̂(0)`.
    pub fn mean(&self) -> Complex64 {
        self.get(WaveVector::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (WaveVector, Complex64)> + '_ {
        self.coeffs.iter().map(|(k, c)| (*k, *c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellCertificate {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    pub rho: f64,
    pub population: u64,
    /// `+∞` (serialized as `null`) when the shell has fewer than two points.
    #[serde(with = "infinite_as_null")]
    pub min_separation: f64,
    pub eps_bound: f64,
}

pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Schur-test bound on `‖𝓘φ𝓘 − ⟨φ⟩𝓘‖` over the shell `(N, L)`.
///
/// The restricted operator has entries `φ̂(k − m)` off the diagonal and
/// zero on it. The Schur test gives `‖A‖ ≤ sqrt(R · C)` with `R` the
/// largest row sum and `C` the largest column sum of `|A|`; for real `φ`
/// the shell's symmetry makes `R = C` and this is the plain row-sum bound.
pub fn schur_bound(phi: &PhiSpectrum, n: u64, l: u64, rho: f64) -> Result<ShellCertificate> {
    let shell = enumerate_shell(n, l)?;
    let set: HashSet<WaveVector> = shell.iter().copied().collect();
    let support: Vec<(WaveVector, f64)> = phi
        .iter()
        .filter(|(d, c)| *d != WaveVector::ZERO && c.norm() > 0.0)
        .map(|(d, c)| (d, c.norm()))
        .collect();

    let mut max_row = 0.0f64;
    let mut max_col = 0.0f64;
    for &k in &shell {
        let mut row = 0.0;
        let mut col = 0.0;
        for &(d, mag) in &support {
            if set.contains(&(k - d)) {
                row += mag;
            }
            if set.contains(&(k + d)) {
                col += mag;
            }
        }
        max_row = max_row.max(row);
        max_col = max_col.max(col);
    }

    Ok(ShellCertificate {
        n,
        l,
        rho,
        population: shell.len() as u64,
        min_separation: min_pair_separation(&shell),
        eps_bound: (max_row * max_col).sqrt(),
    })
}
