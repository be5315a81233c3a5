//! Spectral projector diagnostics on an attractor sample: distortion of
//! `P_N`, a sample-based inverse, and the reduced (inertial form) flow.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, CglParams, Integrator};
use crate::error::{CglError, Result};
use crate::lattice::WaveVector;
use crate::spectral::{GridSpec, SpectralField};

/// Sampled projectors with `min_ratio` above this are declared injective.
pub const INJECTIVITY_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionStats {
    #[serde(rename = "N")]
    pub n: u64,
    pub pair_count: usize,
    /// Ratios `‖P_N(u−v)‖_{H²}/‖u−v‖_{H²}`.
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub injective_flag: bool,
    /// Same statistics in `L²`.
    pub l2_min_ratio: f64,
    pub l2_median_ratio: f64,
    pub l2_max_ratio: f64,
    pub threshold: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Distortion of `P_N` over all pairs of distinct points, or over
/// `subsample = Some((count, seed))` pairs drawn without replacement.
/// Coincident points carry no information and are skipped.
pub fn distortion_stats(
    points: &[SpectralField],
    n: u64,
    subsample: Option<(usize, u64)>,
) -> Result<DistortionStats> {
    if points.len() < 2 {
        return Err(CglError::invalid("distortion statistics need at least two points"));
    }
    let p = points.len();
    let total = p * (p - 1) / 2;
    let chosen: Vec<usize> = match subsample {
        Some((count, seed)) if count < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample_indices(&mut rng, total, count).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..total).collect(),
    };
    let pair_of = |mut idx: usize| {
        let mut i = 0;
        while idx >= p - 1 - i {
            idx -= p - 1 - i;
            i += 1;
        }
        (i, i + 1 + idx)
    };
    let ratios: Vec<(f64, f64)> = chosen
        .par_iter()
        .filter_map(|&idx| {
            let (i, j) = pair_of(idx);
            let d = &points[i] - &points[j];
            let full_h2 = d.sobolev_norm(2.0);
            if full_h2 == 0.0 {
                return None;
            }
            let low = d.project_low(n);
            Some((low.sobolev_norm(2.0) / full_h2, low.l2_norm() / d.l2_norm()))
        })
        .collect();
    if ratios.is_empty() {
        return Err(CglError::invalid("all sampled pairs coincide"));
    }
    let mut h2: Vec<f64> = ratios.iter().map(|r| r.0).collect();
    let mut l2: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    h2.sort_by(f64::total_cmp);
    l2.sort_by(f64::total_cmp);
    let min_ratio = h2[0];
    Ok(DistortionStats {
        n,
        pair_count: h2.len(),
        min_ratio,
        median_ratio: median(&h2),
        max_ratio: *h2.last().unwrap(),
        injective_flag: min_ratio > INJECTIVITY_THRESHOLD,
        l2_min_ratio: l2[0],
        l2_median_ratio: median(&l2),
        l2_max_ratio: *l2.last().unwrap(),
        threshold: INJECTIVITY_THRESHOLD,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftSettings {
    pub neighbours: usize,
    /// Ridge weight relative to the mean squared neighbour offset.
    pub ridge: f64,
    /// Queries farther than this multiple of the largest nearest-neighbour
    /// spacing from the sample are flagged as extrapolation.
    pub extrapolation_factor: f64,
}

impl Default for LiftSettings {
    fn default() -> Self {
        LiftSettings {
            neighbours: 8,
            ridge: 1e-10,
            extrapolation_factor: 2.0,
        }
    }
}

/// Reduced system on the modes `λ ≤ N` together with a sample-based
/// inverse of `P_N`.
#[derive(Clone, Debug)]
pub struct InertialForm {
    n: u64,
    grid: GridSpec,
    basis: Vec<WaveVector>,
    high: Vec<WaveVector>,
    points: Vec<SpectralField>,
    coords: Vec<Vec<f64>>,
    highs: Vec<Vec<f64>>,
    spacing: f64,
    settings: LiftSettings,
}

#[derive(Clone, Debug)]
pub struct Lifted {
    pub field: SpectralField,
    pub extrapolated: bool,
    pub nearest_distance: f64,
}

fn real_coords(f: &SpectralField, modes: &[WaveVector]) -> Vec<f64> {
    modes
        .iter()
        .flat_map(|&k| {
            let c = f.get(k);
            [c.re, c.im]
        })
        .collect()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl InertialForm {
    pub fn new(points: Vec<SpectralField>, n: u64, settings: LiftSettings) -> Result<Self> {
        let grid = points
            .first()
            .ok_or_else(|| CglError::invalid("inertial form needs a non-empty sample"))?
            .grid();
        if points.iter().any(|p| p.grid() != grid) {
            return Err(CglError::invalid("sample points must share one grid"));
        }
        if settings.neighbours == 0 {
            return Err(CglError::invalid("lift needs at least one neighbour"));
        }
        let (basis, high): (Vec<WaveVector>, Vec<WaveVector>) = grid
            .retained_modes()
            .into_iter()
            .partition(|k| k.eigenvalue() <= n);
        let coords: Vec<Vec<f64>> = points.iter().map(|p| real_coords(p, &basis)).collect();
        let highs = points.iter().map(|p| real_coords(p, &high)).collect();
        let nearest: Vec<f64> = (0..coords.len())
            .into_par_iter()
            .map(|i| {
                (0..coords.len())
                    .filter(|&j| j != i)
                    .map(|j| dist_sq(&coords[i], &coords[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        if nearest.iter().any(|&d| d == 0.0) {
            return Err(CglError::invalid(
                "two sample points share their projection; P_N is not injective on the sample",
            ));
        }
        let spacing = nearest
            .iter()
            .filter(|d| d.is_finite())
            .fold(0.0f64, |m, &d| m.max(d.sqrt()));
        Ok(InertialForm {
            n,
            grid,
            basis,
            high,
            points,
            coords,
            highs,
            spacing,
            settings,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn basis(&self) -> &[WaveVector] {
        &self.basis
    }

    pub fn points(&self) -> &[SpectralField] {
        &self.points
    }

    /// Largest distance from a sample projection to its nearest neighbour.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Field whose `P_N` part is `coords` (restricted to the basis) and
    /// whose high modes come from an inverse-distance weighted, ridge
    /// regularised local linear fit over the nearest sample projections.
    pub fn lift(&self, coords: &SpectralField) -> Result<Lifted> {
        if coords.grid() != self.grid {
            return Err(CglError::invalid("lift query lives on a different grid"));
        }
        let x = real_coords(coords, &self.basis);
        let mut order: Vec<(f64, usize)> = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| (dist_sq(c, &x), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = order[0].0.sqrt();
        let extrapolated = nearest > self.settings.extrapolation_factor * self.spacing;

        let mut field = SpectralField::zeros(self.grid);
        for &k in &self.basis {
            field.set(k, coords.get(k))?;
        }
        let high = if nearest == 0.0 {
            self.highs[order[0].1].clone()
        } else {
            let k = self.settings.neighbours.min(order.len());
            self.local_linear(&x, &order[..k])
        };
        for (i, &m) in self.high.iter().enumerate() {
            field.set(m, Complex64::new(high[2 * i], high[2 * i + 1]))?;
        }
        Ok(Lifted {
            field,
            extrapolated,
            nearest_distance: nearest,
        })
    }

    fn local_linear(&self, x: &[f64], neighbours: &[(f64, usize)]) -> Vec<f64> {
        let k = neighbours.len();
        let weights: Vec<f64> = neighbours.iter().map(|(d2, _)| 1.0 / d2.sqrt()).collect();
        let wsum: f64 = weights.iter().sum();
        let dim_x = x.len();
        let dim_y = self.high.len() * 2;
        let mut xbar = vec![0.0; dim_x];
        let mut ybar = vec![0.0; dim_y];
        for (&(_, i), &w) in neighbours.iter().zip(&weights) {
            for (m, v) in xbar.iter_mut().zip(&self.coords[i]) {
                *m += w / wsum * v;
            }
            for (m, v) in ybar.iter_mut().zip(&self.highs[i]) {
                *m += w / wsum * v;
            }
        }
        if k < 2 {
            return ybar;
        }
        // rows √w_i (x_i − x̄); solving in the k-dimensional sample space
        // keeps the fit cheap when the basis is larger than k
        let dx = DMatrix::from_fn(k, dim_x, |r, c| {
            let (_, i) = neighbours[r];
            weights[r].sqrt() * (self.coords[i][c] - xbar[c])
        });
        let gram = &dx * dx.transpose();
        let scale = gram.trace() / k as f64;
        if scale == 0.0 {
            return ybar;
        }
        let regularised = gram + DMatrix::identity(k, k) * (self.settings.ridge * scale);
        let offset = DVector::from_iterator(dim_x, x.iter().zip(&xbar).map(|(a, b)| a - b));
        let rhs = &dx * offset;
        let alpha = match regularised.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => return ybar,
        };
        let mut out = ybar.clone();
        for (r, &(_, i)) in neighbours.iter().enumerate() {
            let coef = alpha[r] * weights[r].sqrt();
            for (o, (yi, yb)) in out.iter_mut().zip(self.highs[i].iter().zip(&ybar)) {
                *o += coef * (yi - yb);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ReducedField {
    pub value: SpectralField,
    pub extrapolated: bool,
}

/// `−(1+iω)λ x + P_N f(lift(x))` on the basis modes.
pub fn inertial_form_rhs(coords: &SpectralField, form: &InertialForm, params: &CglParams) -> Result<ReducedField> {
    let (nonlinear, extrapolated) = reduced_nonlinearity(coords, form, params)?;
    let mut value = coords.project_low(form.n).apply_laplacian(Complex64::new(1.0, params.omega));
    value.axpy(Complex64::new(1.0, 0.0), &nonlinear);
    Ok(ReducedField { value, extrapolated })
}

fn reduced_nonlinearity(coords: &SpectralField, form: &InertialForm, params: &CglParams) -> Result<(SpectralField, bool)> {
    let lifted = form.lift(coords)?;
    let f = lifted.field.nonlinearity_eval(&params.nonlinearity)?;
    Ok((project_basis(&f, form), lifted.extrapolated))
}

fn project_basis(f: &SpectralField, form: &InertialForm) -> SpectralField {
    f.project(form.basis())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// `‖P_N Ψ(t) − x(t)‖` in `L²`.
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub final_error: f64,
    /// Number of reduced-step evaluations that left the sampled region.
    pub extrapolation_steps: usize,
    pub extrapolated: bool,
}

/// Integrates the full equation and the reduced system from `start` with
/// the same scheme and step, comparing `P_N` of the former with the latter.
pub fn track_error(form: &InertialForm, params: &CglParams, horizon: f64, start: &SpectralField) -> Result<TrackReport> {
    if start.grid() != form.grid || params.grid != form.grid {
        return Err(CglError::invalid("tracking start, parameters and form must share the grid"));
    }
    let full = simulate(params, start, horizon)?;
    let mut x = project_basis(start, form);
    let mut errors = vec![(&full.states[0].project(form.basis()) - &x).l2_norm()];
    let mut flagged = 0;
    for j in 1..full.len() {
        let dt = full.times[j] - full.times[j - 1];
        let integrator = if (dt - params.dt).abs() <= 1e-12 * params.dt {
            Integrator::new(params)
        } else {
            Integrator::with_step(params, dt)
        };
        x = integrator.step_with(&x, |u| {
            let (n, ex) = reduced_nonlinearity(u, form, params)?;
            flagged += usize::from(ex);
            Ok(n)
        })?;
        errors.push((&full.states[j].project(form.basis()) - &x).l2_norm());
    }
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(TrackReport {
        n: form.n,
        horizon,
        times: full.times,
        final_error: *errors.last().unwrap(),
        errors,
        max_error,
        extrapolation_steps: flagged,
        extrapolated: flagged > 0,
    })
}
