//! Linear backward theory along trajectories.
//!
//! The central object is the backward problem
//!
//! ```text
//! ∂t w − (1+iω)Δw − θw + a w + b w̄ = h,   t ∈ (−T, 0],   P_N w(0) = v⁺,
//! ```
//!
//! with `θ = N + ½`. Time series live on a uniform grid ending at `t = 0`
//! and are interpolated piecewise linearly between nodes. Every per-mode
//! propagation below is exact for such forcing, so discrete and continuous
//! solutions differ only through the interpolation of `h`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{CglError, Result};
use crate::expint::linear_forcing_weights;
use crate::lattice::{infinite_as_null, ModeBand, WaveVector};
use crate::spectral::{volume_sqrt, GridSpec, NonlinearitySpec, PhysicalField, SpectralField};

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Coefficients of `v` and `v̄` in the equation of variations, sampled on
/// a time grid that ends at `t = 0`.
#[derive(Clone, Debug)]
pub struct VariationalCoefficients {
    pub times: Vec<f64>,
    pub a: Vec<SpectralField>,
    pub b: Vec<SpectralField>,
    /// Discrete `C¹` bound: `sup|a| + sup|∂a| + sup|b| + sup|∂b|`, slopes
    /// taken as finite differences in `t` and along each axis.
    pub k_bound: f64,
    pub mean_a: Vec<Complex64>,
}

impl VariationalCoefficients {
    pub fn new(times: Vec<f64>, a: Vec<SpectralField>, b: Vec<SpectralField>) -> Result<Self> {
        if times.is_empty() || times.len() != a.len() || times.len() != b.len() {
            return Err(CglError::invalid(
                "coefficient series must be non-empty and of equal length",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CglError::invalid("coefficient times must be strictly increasing"));
        }
        let last = *times.last().unwrap();
        if last.abs() > 1e-12 * (1.0 + times[0].abs()) {
            return Err(CglError::invalid(format!(
                "coefficient window must end at t = 0, ends at {last}"
            )));
        }
        let grid = a[0].grid();
        if a.iter().chain(&b).any(|f| f.grid() != grid) {
            return Err(CglError::invalid("coefficient fields must share one grid"));
        }
        if a.iter().chain(&b).any(|f| !f.is_finite()) {
            return Err(CglError::NonFinite {
                context: "variational coefficients".into(),
            });
        }
        let pa: Vec<PhysicalField> = a.iter().map(|f| f.to_physical()).collect();
        let pb: Vec<PhysicalField> = b.iter().map(|f| f.to_physical()).collect();
        let k_bound = c1_bound(&pa, &times) + c1_bound(&pb, &times);
        let mean_a = a.iter().map(|f| f.spatial_average()).collect();
        Ok(VariationalCoefficients {
            times,
            a,
            b,
            k_bound,
            mean_a,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.a[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(sup|a|, sup|b|)` over all grid samples.
    pub fn sup_norms(&self) -> (f64, f64) {
        let sup = |fields: &[SpectralField]| {
            fields
                .iter()
                .flat_map(|f| f.to_physical().into_values())
                .map(|v| v.norm())
                .fold(0.0, f64::max)
        };
        (sup(&self.a), sup(&self.b))
    }

    /// Common spacing of the time grid, or an error if it is not uniform.
    pub fn uniform_step(&self) -> Result<f64> {
        uniform_step(&self.times)
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(CglError::invalid("a time window needs at least two nodes"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(CglError::invalid("time grid must be uniform"));
    }
    Ok(dt)
}

fn c1_bound(fields: &[PhysicalField], times: &[f64]) -> f64 {
    let m = fields[0].grid().size();
    let h = 2.0 * std::f64::consts::PI / m as f64;
    let mut sup = 0.0f64;
    let mut slope = 0.0f64;
    for f in fields {
        let v = f.values();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let here = v[(i * m + j) * m + k];
                    sup = sup.max(here.norm());
                    let neighbours = [
                        v[(((i + 1) % m) * m + j) * m + k],
                        v[(i * m + (j + 1) % m) * m + k],
                        v[(i * m + j) * m + (k + 1) % m],
                    ];
                    for n in neighbours {
                        slope = slope.max((n - here).norm() / h);
                    }
                }
            }
        }
    }
    for (w, t) in fields.windows(2).zip(times.windows(2)) {
        let dt = t[1] - t[0];
        for (x, y) in w[0].values().iter().zip(w[1].values()) {
            slope = slope.max((y - x).norm() / dt);
        }
    }
    sup + slope
}

/// `a = −∂_Ψ f(Ψ)`, `b = −∂_Ψ̄ f(Ψ)` along the trajectory, with times
/// shifted so that the final state sits at `t = 0`.
pub fn linearize_coefficients(
    traj: &Trajectory,
    f: &NonlinearitySpec,
) -> Result<VariationalCoefficients> {
    if traj.states.iter().any(|s| !s.is_finite()) {
        return Err(CglError::NonFinite {
            context: "trajectory".into(),
        });
    }
    let t_end = *traj
        .times
        .last()
        .ok_or_else(|| CglError::invalid("empty trajectory"))?;
    let times = traj.times.iter().map(|t| t - t_end).collect();
    let mut a = Vec::with_capacity(traj.len());
    let mut b = Vec::with_capacity(traj.len());
    for state in &traj.states {
        let phys = state.to_physical();
        let grid = phys.grid();
        let (mut pa, mut pb) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
        for &psi in phys.values() {
            let (d, dbar) = f.derivatives(psi);
            pa.push(-d);
            pb.push(-dbar);
        }
        a.push(PhysicalField::new(grid, pa)?.to_spectral());
        b.push(PhysicalField::new(grid, pb)?.to_spectral());
    }
    VariationalCoefficients::new(times, a, b)
}

/// `w(t) = e^{A(t)} v(t)` with `A(t) = ∫₀ᵗ ⟨a(s)⟩ ds` (trapezoid rule).
#[derive(Clone, Debug)]
pub struct Gauge {
    pub times: Vec<f64>,
    pub exponent: Vec<Complex64>,
}

impl Gauge {
    pub fn weight(&self, j: usize) -> Complex64 {
        self.exponent[j].exp()
    }

    fn scale_series(&self, series: &[SpectralField], sign: f64) -> Result<Vec<SpectralField>> {
        if series.len() != self.exponent.len() {
            return Err(CglError::SizeMismatch {
                expected: self.exponent.len(),
                actual: series.len(),
            });
        }
        Ok(series
            .iter()
            .zip(&self.exponent)
            .map(|(f, e)| f.scale((e * sign).exp()))
            .collect())
    }

    /// `v ↦ e^{A} v`; also maps `h` to `h̃`.
    pub fn apply(&self, series: &[SpectralField]) -> Result<Vec<SpectralField>> {
        self.scale_series(series, 1.0)
    }

    pub fn invert(&self, series: &[SpectralField]) -> Result<Vec<SpectralField>> {
        self.scale_series(series, -1.0)
    }
}

/// Removes the spatial mean of `a`: returns coefficients `a − ⟨a⟩`,
/// `b·e^{2i Im A}` and the gauge carrying solutions and forcing across.
pub fn gauge_zero_mean(coeffs: &VariationalCoefficients) -> Result<(VariationalCoefficients, Gauge)> {
    let n = coeffs.len();
    let mut exponent = vec![Complex64::default(); n];
    for j in (0..n.saturating_sub(1)).rev() {
        let dt = coeffs.times[j + 1] - coeffs.times[j];
        exponent[j] = exponent[j + 1] - (coeffs.mean_a[j] + coeffs.mean_a[j + 1]) * (0.5 * dt);
    }
    let mut a = coeffs.a.clone();
    for (f, m) in a.iter_mut().zip(&coeffs.mean_a) {
        let zero = f.get(WaveVector::ZERO);
        f.set(WaveVector::ZERO, zero - m)?;
    }
    let b = coeffs
        .b
        .iter()
        .zip(&exponent)
        .map(|(f, e)| f.scale(Complex64::from_polar(1.0, 2.0 * e.im)))
        .collect();
    let gauged = VariationalCoefficients::new(coeffs.times.clone(), a, b)?;
    Ok((
        gauged,
        Gauge {
            times: coeffs.times.clone(),
            exponent,
        },
    ))
}

/// Exact propagator for `w' + μw = g` over one interval with `g` linear.
#[derive(Clone, Debug)]
struct ModeSolver {
    mu: Complex64,
    /// Low modes are integrated backward from `t = 0`.
    backward: bool,
    decay: Complex64,
    w_near: Complex64,
    w_far: Complex64,
    /// Per-quadrature-node `(s, e^{−μs}, ws, we)` on one interval.
    nodes: Vec<(f64, Complex64, Complex64, Complex64)>,
    dt: f64,
}

impl ModeSolver {
    fn new(lambda: u64, theta: f64, omega: f64, dt: f64) -> Self {
        let lam = lambda as f64;
        let mu = Complex64::new(lam - theta, omega * lam);
        let backward = lam < theta;
        let (decay, w_near, w_far) = if backward {
            let (ws, we) = linear_forcing_weights(mu, dt);
            ((mu * dt).exp(), ws, we)
        } else {
            let (ws, we) = linear_forcing_weights(-mu, dt);
            ((-mu * dt).exp(), we, ws)
        };
        let pieces = (mu.norm() * dt).ceil().max(1.0) as usize;
        let width = dt / pieces as f64;
        let mut nodes = Vec::with_capacity(4 * pieces);
        for p in 0..pieces {
            for x in GAUSS_NODES {
                let s = width * (p as f64 + 0.5 * (1.0 + x));
                let (ws, we) = linear_forcing_weights(-mu, s);
                nodes.push((s, (-mu * s).exp(), ws, we));
            }
        }
        ModeSolver {
            mu,
            backward,
            decay,
            w_near,
            w_far,
            nodes,
            dt,
        }
    }

    fn gap(&self) -> f64 {
        self.mu.re.abs()
    }

    /// Nodes `t_j = −(n−1−j)·dt`; `terminal` is `w(0)` for low modes and
    /// ignored for high modes, which start from `w(−T) = 0`.
    fn solve(&self, g: &[Complex64], terminal: Complex64, out: &mut [Complex64]) {
        let n = g.len();
        if self.backward {
            out[n - 1] = terminal;
            for j in (0..n - 1).rev() {
                // w_near multiplies the node the step starts from
                out[j] = self.decay * out[j + 1] - (self.w_near * g[j + 1] + self.w_far * g[j]);
            }
        } else {
            out[0] = Complex64::default();
            for j in 0..n - 1 {
                out[j + 1] = self.decay * out[j] + self.w_far * g[j] + self.w_near * g[j + 1];
            }
        }
    }

    /// `∫|w|²` over the window, evaluating the exact solution inside every
    /// interval at Gauss nodes.
    fn norm_sq(&self, w: &[Complex64], g: &[Complex64]) -> f64 {
        let pieces = self.nodes.len() / 4;
        let width = self.dt / pieces as f64;
        let mut total = 0.0;
        for j in 0..w.len() - 1 {
            let slope = (g[j + 1] - g[j]) / self.dt;
            for (q, &(s, e, ws, we)) in self.nodes.iter().enumerate() {
                let value = e * w[j] + ws * g[j] + we * (g[j] + slope * s);
                total += GAUSS_WEIGHTS[q % 4] * 0.5 * width * value.norm_sqr();
            }
        }
        total
    }
}

/// `∫|g|²` for the piecewise-linear interpolant of nodal values.
fn linear_norm_sq(g: &[Complex64], dt: f64) -> f64 {
    g.windows(2)
        .map(|p| dt / 3.0 * (p[0].norm_sqr() + (p[0] * p[1].conj()).re + p[1].norm_sqr()))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarSolution {
    pub w: Vec<Complex64>,
    pub w_norm: f64,
    pub h_norm: f64,
    /// `‖h‖/|λ−θ| + |v⁺|/√(2|λ−θ|)`.
    pub bound: f64,
    pub bound_holds: bool,
}

/// Solves `w' + (λ − θ + iωλ) w = h` on the window sampled by `h` with
/// spacing `dt`, ending at `t = 0`. Modes below `θ` take `w(0) = v⁺`;
/// modes above decay into the past and must not receive terminal data.
///
/// Fails with [`CglError::BoundViolation`] when the computed norm exceeds
/// the dichotomy bound by more than a factor `1 + 5·dt`.
pub fn scalar_mode_solve(
    lambda: u64,
    theta: f64,
    omega: f64,
    h: &[Complex64],
    dt: f64,
    v_plus: Option<Complex64>,
) -> Result<ScalarSolution> {
    if h.len() < 2 || !(dt > 0.0) {
        return Err(CglError::invalid("forcing needs at least two nodes and dt > 0"));
    }
    let gap = (lambda as f64 - theta).abs();
    if gap < 0.5 - 1e-12 {
        return Err(CglError::invalid(format!(
            "|λ − θ| = {gap} is below 1/2; θ must be N + 1/2"
        )));
    }
    let low = (lambda as f64) < theta;
    if low != v_plus.is_some() {
        return Err(CglError::invalid(
            "terminal data must be supplied exactly for modes with λ ≤ N",
        ));
    }
    let solver = ModeSolver::new(lambda, theta, omega, dt);
    let mut w = vec![Complex64::default(); h.len()];
    let terminal = v_plus.unwrap_or_default();
    solver.solve(h, terminal, &mut w);
    let w_norm = solver.norm_sq(&w, h).sqrt();
    let h_norm = linear_norm_sq(h, dt).sqrt();
    let bound = h_norm / solver.gap() + terminal.norm() / (2.0 * solver.gap()).sqrt();
    let bound_holds = w_norm <= bound * (1.0 + 5.0 * dt);
    if !bound_holds {
        return Err(CglError::BoundViolation {
            computed: w_norm,
            bound,
        });
    }
    Ok(ScalarSolution {
        w,
        w_norm,
        h_norm,
        bound,
        bound_holds,
    })
}

/// Measured constants of a backward estimate `‖v‖ ≤ C(‖h‖ + ‖v⁺‖)` or
/// `‖v(t)‖ ≤ C e^{−θt} ‖P_N v(0)‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReport {
    #[serde(rename = "C_measured")]
    pub c_measured: f64,
    pub theta_measured: f64,
    #[serde(rename = "bound_C", with = "infinite_as_null")]
    pub bound_c: f64,
    pub bound_theta: f64,
    pub contraction_factor: f64,
    pub pass: bool,
}

/// Problem data for [`backward_bvp_solve`]; `h` is the forcing of the
/// shifted equation and `v_plus` lives on modes with `λ ≤ N`.
#[derive(Clone, Debug)]
pub struct BackwardProblem {
    pub coeffs: VariationalCoefficients,
    pub omega: f64,
    pub h: Vec<SpectralField>,
    pub v_plus: SpectralField,
    n: u64,
    dt: f64,
}

impl BackwardProblem {
    pub fn new(
        coeffs: VariationalCoefficients,
        omega: f64,
        n: u64,
        h: Vec<SpectralField>,
        v_plus: SpectralField,
    ) -> Result<Self> {
        let dt = coeffs.uniform_step()?;
        if h.len() != coeffs.len() {
            return Err(CglError::SizeMismatch {
                expected: coeffs.len(),
                actual: h.len(),
            });
        }
        let grid = coeffs.grid();
        if h.iter().any(|f| f.grid() != grid) || v_plus.grid() != grid {
            return Err(CglError::invalid("forcing and terminal data must share the coefficient grid"));
        }
        if let Some((k, _)) = v_plus.modes().find(|(k, c)| k.eigenvalue() > n && c.norm() > 0.0) {
            return Err(CglError::invalid(format!(
                "terminal data has a component at {k:?} with λ > N = {n}"
            )));
        }
        Ok(BackwardProblem {
            coeffs,
            omega,
            h,
            v_plus,
            n,
            dt,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.n as f64 + 0.5
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpSettings {
    pub max_iterations: usize,
    /// Stop once successive iterates differ by less than this, relatively.
    pub tolerance: f64,
}

impl Default for BvpSettings {
    fn default() -> Self {
        BvpSettings {
            max_iterations: 60,
            tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandNorms {
    pub low: f64,
    pub intermediate: f64,
    pub high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpReport {
    pub estimate: EstimateReport,
    pub iterations: usize,
    /// `‖w − S(h − aw − bw̄)‖ / ‖w‖` for the returned iterate.
    pub residual: f64,
    pub contraction_factors: Vec<f64>,
    pub k_bound: f64,
    /// `sup|a| + sup|b|`; the iteration contracts whenever `2κ < 1`.
    pub kappa: f64,
    pub k_over_l: f64,
    pub k2_over_l: f64,
    pub band_norms: BandNorms,
    pub w_norm: f64,
    pub h_norm: f64,
    pub v_plus_norm: f64,
}

#[derive(Clone, Debug)]
pub enum BvpOutcome {
    Converged {
        w: Vec<SpectralField>,
        report: BvpReport,
    },
    Diverged(BvpReport),
}

impl BvpOutcome {
    pub fn report(&self) -> &BvpReport {
        match self {
            BvpOutcome::Converged { report, .. } | BvpOutcome::Diverged(report) => report,
        }
    }
}

struct DiagonalSolver {
    grid: GridSpec,
    modes: Vec<(usize, u64)>,
    solvers: Vec<ModeSolver>,
    terminal: Vec<Complex64>,
}

impl DiagonalSolver {
    fn new(problem: &BackwardProblem) -> Self {
        let grid = problem.coeffs.grid();
        let mut modes = Vec::new();
        let mut solvers = Vec::new();
        let mut terminal = Vec::new();
        for k in grid.retained_modes() {
            let idx = grid.index_of(k).expect("retained modes are on the grid");
            modes.push((idx, k.eigenvalue()));
            solvers.push(ModeSolver::new(k.eigenvalue(), problem.theta(), problem.omega, problem.dt));
            terminal.push(problem.v_plus.coeffs()[idx]);
        }
        DiagonalSolver {
            grid,
            modes,
            solvers,
            terminal,
        }
    }

    fn series(&self, fields: &[SpectralField], idx: usize) -> Vec<Complex64> {
        fields.iter().map(|f| f.coeffs()[idx]).collect()
    }

    /// Diagonal solve `S(g, v⁺)` on the retained modes.
    fn apply(&self, g: &[SpectralField]) -> Vec<SpectralField> {
        let mut out = vec![SpectralField::zeros(self.grid); g.len()];
        let mut buf = vec![Complex64::default(); g.len()];
        for ((&(idx, _), solver), &term) in self.modes.iter().zip(&self.solvers).zip(&self.terminal) {
            solver.solve(&self.series(g, idx), term, &mut buf);
            for (f, v) in out.iter_mut().zip(&buf) {
                f.coeffs_mut()[idx] = *v;
            }
        }
        out
    }

    /// Squared window norm per mode, classified by eigenvalue.
    fn norms_sq(&self, w: &[SpectralField], g: &[SpectralField]) -> Vec<(u64, f64)> {
        self.modes
            .iter()
            .zip(&self.solvers)
            .map(|(&(idx, lam), s)| (lam, s.norm_sq(&self.series(w, idx), &self.series(g, idx))))
            .collect()
    }
}

fn series_norm(fields: &[SpectralField], dt: f64) -> f64 {
    let mut total = 0.0;
    for idx in 0..fields[0].grid().len() {
        let s: Vec<Complex64> = fields.iter().map(|f| f.coeffs()[idx]).collect();
        total += linear_norm_sq(&s, dt);
    }
    volume_sqrt() * total.sqrt()
}

fn series_diff(a: &[SpectralField], b: &[SpectralField]) -> Vec<SpectralField> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a·w + b·w̄` evaluated on the grid and truncated to the retained modes.
fn coupling(a_phys: &[PhysicalField], b_phys: &[PhysicalField], w: &[SpectralField]) -> Vec<SpectralField> {
    let mut out = Vec::with_capacity(w.len());
    for ((a, b), wj) in a_phys.iter().zip(b_phys).zip(w) {
        let mut p = wj.to_physical();
        for ((v, x), y) in p.values_mut().iter_mut().zip(a.values()).zip(b.values()) {
            *v = x * *v + y * v.conj();
        }
        out.push(p.to_spectral().dealias());
    }
    out
}

/// Picard iteration `w ← S(h − a w − b w̄, v⁺)` with the diagonal dichotomy
/// solve `S`. Forcing and terminal data are truncated to the retained
/// modes. Non-convergence within the cap is returned as
/// [`BvpOutcome::Diverged`] together with the diagnostics gathered so far.
pub fn backward_bvp_solve(
    problem: &BackwardProblem,
    band: &ModeBand,
    settings: &BvpSettings,
) -> Result<BvpOutcome> {
    if band.n != problem.n {
        return Err(CglError::invalid(format!(
            "mode band is built for N = {}, problem has N = {}",
            band.n, problem.n
        )));
    }
    let dt = problem.dt;
    let diag = DiagonalSolver::new(problem);
    let h: Vec<SpectralField> = problem.h.iter().map(|f| f.dealias()).collect();
    let a_phys: Vec<PhysicalField> = problem.coeffs.a.iter().map(|f| f.to_physical()).collect();
    let b_phys: Vec<PhysicalField> = problem.coeffs.b.iter().map(|f| f.to_physical()).collect();

    let forcing = |w: &[SpectralField]| series_diff(&h, &coupling(&a_phys, &b_phys, w));

    let mut w = diag.apply(&h);
    let mut factors = Vec::new();
    let mut prev_diff: Option<f64> = None;
    let mut first_diff = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_rel = f64::INFINITY;
    while iterations < settings.max_iterations {
        iterations += 1;
        let next = diag.apply(&forcing(&w));
        let diff = series_norm(&series_diff(&next, &w), dt);
        let scale = series_norm(&next, dt);
        w = next;
        if !diff.is_finite() || !scale.is_finite() {
            break;
        }
        if let Some(p) = prev_diff {
            // ratios of roundoff-level updates carry no information
            if p > 1e-10 * scale {
                factors.push(diff / p);
            }
        }
        let first = *first_diff.get_or_insert(diff);
        prev_diff = Some(diff);
        last_rel = if scale > 0.0 { diff / scale } else { 0.0 };
        if last_rel < settings.tolerance {
            converged = true;
            break;
        }
        if iterations > 5 && diff > 1e6 * first.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let g = forcing(&w);
    let check = diag.apply(&g);
    let w_l2 = series_norm(&w, dt);
    let residual = if w_l2 > 0.0 {
        series_norm(&series_diff(&check, &w), dt) / w_l2
    } else if series_norm(&check, dt) == 0.0 {
        0.0
    } else {
        last_rel
    };

    let mut band_sq = [0.0f64; 3];
    for (lam, sq) in diag.norms_sq(&w, &g) {
        let slot = if lam + band.l < band.n {
            0
        } else if lam <= band.n + band.l {
            1
        } else {
            2
        };
        band_sq[slot] += sq;
    }
    let vol = volume_sqrt();
    let band_norms = BandNorms {
        low: vol * band_sq[0].sqrt(),
        intermediate: vol * band_sq[1].sqrt(),
        high: vol * band_sq[2].sqrt(),
    };
    let w_norm = vol * band_sq.iter().sum::<f64>().sqrt();
    let h_norm = series_norm(&h, dt);
    let v_plus_norm = problem.v_plus.dealias().l2_norm();
    let (sup_a, sup_b) = problem.coeffs.sup_norms();
    let kappa = sup_a + sup_b;
    let k = problem.coeffs.k_bound;
    let l = band.l as f64;
    let denom = h_norm + v_plus_norm;
    let c_measured = if denom > 0.0 { w_norm / denom } else { 0.0 };
    let bound_c = if 2.0 * kappa < 1.0 {
        2.0 / (1.0 - 2.0 * kappa)
    } else {
        f64::INFINITY
    };
    let contraction_factor = factors.iter().copied().fold(0.0, f64::max);
    let estimate = EstimateReport {
        c_measured,
        theta_measured: problem.theta(),
        bound_c,
        bound_theta: problem.theta(),
        contraction_factor,
        pass: converged && c_measured <= bound_c,
    };
    let report = BvpReport {
        estimate,
        iterations,
        residual,
        contraction_factors: factors,
        k_bound: k,
        kappa,
        k_over_l: k / l,
        k2_over_l: k * k / l,
        band_norms,
        w_norm,
        h_norm,
        v_plus_norm,
    };
    Ok(if converged && w_norm.is_finite() {
        BvpOutcome::Converged { w, report }
    } else {
        BvpOutcome::Diverged(report)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformDirection {
    ZToRotating,
    RotatingToZ,
    RotatingToU,
    UToRotating,
}

/// Changes of variables for one intermediate mode with `ω_n = ωλ_n`.
///
/// `ZToRotating`: `Z = e^{iω_n t} z`. `RotatingToU`:
/// `U = Z − c Z̄` with `c = (i/(2ω_n)) e^{2iω_n t} β(t)`, inverted by
/// `Z = (U + c Ū)/(1 − |c|²)`. The `U` maps need `|β(t)|/(2|ω_n|) < 1`.
pub fn temporal_transform(
    series: &[Complex64],
    times: &[f64],
    omega_n: f64,
    beta: &[Complex64],
    direction: TransformDirection,
) -> Result<Vec<Complex64>> {
    if series.len() != times.len() {
        return Err(CglError::SizeMismatch {
            expected: times.len(),
            actual: series.len(),
        });
    }
    if omega_n == 0.0 || !omega_n.is_finite() {
        return Err(CglError::invalid("temporal transforms need a nonzero finite ω_n"));
    }
    let rotate = |sign: f64| -> Vec<Complex64> {
        series
            .iter()
            .zip(times)
            .map(|(z, &t)| z * Complex64::from_polar(1.0, sign * omega_n * t))
            .collect()
    };
    match direction {
        TransformDirection::ZToRotating => return Ok(rotate(1.0)),
        TransformDirection::RotatingToZ => return Ok(rotate(-1.0)),
        _ => {}
    }
    if beta.len() != times.len() {
        return Err(CglError::SizeMismatch {
            expected: times.len(),
            actual: beta.len(),
        });
    }
    let ratio = beta.iter().map(|b| b.norm()).fold(0.0, f64::max) / (2.0 * omega_n.abs());
    if !(ratio < 1.0) {
        return Err(CglError::AveragingRegime { ratio });
    }
    let i = Complex64::i();
    Ok(series
        .iter()
        .zip(times)
        .zip(beta)
        .map(|((x, &t), b)| {
            let c = i / (2.0 * omega_n) * Complex64::from_polar(1.0, 2.0 * omega_n * t) * b;
            match direction {
                TransformDirection::RotatingToU => x - c * x.conj(),
                _ => (x + c * x.conj()) / (1.0 - c.norm_sqr()),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallnessReport {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    pub omega: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub eps: f64,
    /// `1/(2|ω|(N−L))`, bounding `1/(2ω_n)` on the intermediate band.
    pub inverse_dispersion: f64,
    /// `(2L+1)/(4|ω|(N−L))`, bounding `|λ_n − θ|/(2ω_n)`.
    pub gap_ratio: f64,
    pub k_inverse_dispersion: f64,
    pub k_gap_ratio: f64,
    pub inverse_dispersion_small: bool,
    pub gap_ratio_small: bool,
}

impl SmallnessReport {
    pub fn passes(&self) -> bool {
        self.inverse_dispersion_small && self.gap_ratio_small
    }
}

pub fn smallness_report(n: u64, l: u64, omega: f64, k: f64, eps: f64) -> Result<SmallnessReport> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(CglError::invalid("smallness bounds need a nonzero finite omega"));
    }
    if l >= n {
        return Err(CglError::invalid(format!("need N > L, got N = {n}, L = {l}")));
    }
    let gap = (n - l) as f64;
    let inverse_dispersion = 1.0 / (2.0 * omega.abs() * gap);
    let gap_ratio = (2 * l + 1) as f64 / (4.0 * omega.abs() * gap);
    Ok(SmallnessReport {
        n,
        l,
        omega,
        k,
        eps,
        inverse_dispersion,
        gap_ratio,
        k_inverse_dispersion: k * inverse_dispersion,
        k_gap_ratio: k * gap_ratio,
        inverse_dispersion_small: k * inverse_dispersion < eps,
        gap_ratio_small: k * gap_ratio < eps,
    })
}

/// Smallest `N ∈ (L, n_max]` whose smallness report passes.
pub fn minimal_passing_n(l: u64, omega: f64, k: f64, eps: f64, n_max: u64) -> Result<Option<u64>> {
    for n in l + 1..=n_max {
        if smallness_report(n, l, omega, k, eps)?.passes() {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSettings {
    #[serde(rename = "bound_C")]
    pub bound_c: f64,
    /// Relative slack on both inequalities.
    pub tolerance: f64,
    /// `‖P_N v(0)‖ ≤ injectivity_floor · ‖v(0)‖` counts as a collapse.
    pub injectivity_floor: f64,
}

impl Default for LipschitzSettings {
    fn default() -> Self {
        LipschitzSettings {
            bound_c: 10.0,
            tolerance: 1e-9,
            injectivity_floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case", deny_unknown_fields)]
pub enum LipschitzMeasurement {
    Estimate(EstimateReport),
    /// The projected difference vanished at `t = 0` although the fields
    /// differ: evidence against injectivity of `P_N`.
    InjectivityFailure { difference_norm: f64, projected_norm: f64 },
}

/// Measures `‖v(t)‖ ≤ C e^{−θ_N t} ‖P_N v(0)‖` for `v = Ψ¹ − Ψ²`, with the
/// pair's common time axis shifted so that it ends at `t = 0`.
///
/// `theta_measured` is minus the least-squares slope of
/// `log(‖v(t)‖/‖P_N v(0)‖)` over the half of the window nearest `t = 0`.
/// `contraction_factor` is not measured here and is reported as 0.
pub fn measure_backward_lipschitz(
    first: &Trajectory,
    second: &Trajectory,
    n: u64,
    settings: &LipschitzSettings,
) -> Result<LipschitzMeasurement> {
    if first.times.len() != second.times.len()
        || first
            .times
            .iter()
            .zip(&second.times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs()))
    {
        return Err(CglError::invalid("paired trajectories must share their time axis"));
    }
    if first.params.grid != second.params.grid {
        return Err(CglError::invalid("paired trajectories must share the grid"));
    }
    if first.len() < 2 {
        return Err(CglError::invalid("paired trajectories need at least two snapshots"));
    }
    let t_end = *first.times.last().unwrap();
    let times: Vec<f64> = first.times.iter().map(|t| t - t_end).collect();
    let norms: Vec<f64> = first
        .states
        .iter()
        .zip(&second.states)
        .map(|(a, b)| (a - b).l2_norm())
        .collect();
    if norms.iter().all(|&v| v == 0.0) {
        return Err(CglError::invalid("paired trajectories coincide; the difference is zero"));
    }
    let v0 = first.last() - second.last();
    let projected = v0.project_low(n).l2_norm();
    let difference = v0.l2_norm();
    if projected == 0.0 || projected <= settings.injectivity_floor * difference {
        return Ok(LipschitzMeasurement::InjectivityFailure {
            difference_norm: difference,
            projected_norm: projected,
        });
    }

    let theta_n = n as f64 + 0.5;
    let c_measured = times
        .iter()
        .zip(&norms)
        .map(|(&t, &v)| v * (theta_n * t).exp() / projected)
        .fold(0.0, f64::max);

    let half = 0.5 * times[0];
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&norms)
        .filter(|(&t, &v)| t >= half && v > 0.0)
        .map(|(&t, &v)| (t, (v / projected).ln()))
        .unzip();
    let theta_measured = if xs.len() >= 2 {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        -sxy / sxx
    } else {
        0.0
    };
    let slack = 1.0 + settings.tolerance;
    Ok(LipschitzMeasurement::Estimate(EstimateReport {
        c_measured,
        theta_measured,
        bound_c: settings.bound_c,
        bound_theta: theta_n,
        contraction_factor: 0.0,
        pass: c_measured <= settings.bound_c * slack && theta_measured <= theta_n * slack,
    }))
}

#[cfg(test)]
mod tests;
