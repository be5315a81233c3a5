//! Time integration of `∂tΨ = (1+iω)ΔΨ + f(Ψ, Ψ̄)` on the periodic grid.
//!
//! The stepper is second-order exponential time differencing (ETD2RK):
//! the linear part `L_k = −(1+iω)|k|²` is propagated exactly by `e^{L dt}`
//! and `f` enters through `φ1`/`φ2` weights. With `f ≡ 0` a step is the exact
//! propagator.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CglError, Result};
use crate::expint::{phi1, phi2};
use crate::spectral::{GridSpec, NonlinearitySpec, SpectralField};

/// `‖Ψ(t)‖_{H²} ≤ q_gain·‖Ψ(0)‖_{H²}·e^{−αt} + Q_*`, the envelope the
/// monitor checks when one is supplied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationEnvelope {
    pub alpha: f64,
    pub q_star: f64,
    #[serde(default = "one")]
    pub q_gain: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug)]
pub struct CglParams {
    pub omega: f64,
    pub nonlinearity: NonlinearitySpec,
    pub grid: GridSpec,
    pub dt: f64,
    pub dissip: Option<DissipationEnvelope>,
}

impl CglParams {
    pub fn new(omega: f64, nonlinearity: NonlinearitySpec, grid: GridSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(CglError::invalid(format!("time step must be positive, got {dt}")));
        }
        if !omega.is_finite() {
            return Err(CglError::invalid("omega must be finite"));
        }
        Ok(CglParams {
            omega,
            nonlinearity,
            grid,
            dt,
            dissip: None,
        })
    }

    /// Classical cGL nonlinearity `(1+iβ)Ψ − (1+iδ)Ψ|Ψ|²`.
    pub fn cubic(omega: f64, beta: f64, delta: f64, grid: GridSpec, dt: f64) -> Result<Self> {
        CglParams::new(omega, NonlinearitySpec::Cubic { beta, delta }, grid, dt)
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let mut p = self.clone();
        if !(dt > 0.0) {
            return Err(CglError::invalid(format!("time step must be positive, got {dt}")));
        }
        p.dt = dt;
        Ok(p)
    }

    /// Projector injectivity relies on the dispersion `ω ≠ 0`.
    pub fn require_dispersion(&self) -> Result<()> {
        if self.omega == 0.0 {
            return Err(CglError::invalid(
                "Mané analysis requires a nonzero cross-diffusion coefficient omega",
            ));
        }
        Ok(())
    }

    pub fn linear_symbol(&self, eigenvalue: u64) -> Complex64 {
        -Complex64::new(1.0, self.omega) * eigenvalue as f64
    }
}

/// Precomputed ETD2RK coefficients for one `(params, dt)` pair.
pub struct Integrator {
    nonlinearity: NonlinearitySpec,
    grid: GridSpec,
    propagator: Vec<Complex64>,
    phi1_dt: Vec<Complex64>,
    phi2_dt: Vec<Complex64>,
}

impl Integrator {
    pub fn new(params: &CglParams) -> Self {
        Integrator::with_step(params, params.dt)
    }

    pub fn with_step(params: &CglParams, dt: f64) -> Self {
        let grid = params.grid;
        let n = grid.len();
        let mut propagator = Vec::with_capacity(n);
        let mut phi1_dt = Vec::with_capacity(n);
        let mut phi2_dt = Vec::with_capacity(n);
        for i in 0..n {
            let z = params.linear_symbol(grid.wavevector(i).eigenvalue()) * dt;
            propagator.push(z.exp());
            phi1_dt.push(phi1(z) * dt);
            phi2_dt.push(phi2(z) * dt);
        }
        Integrator {
            nonlinearity: params.nonlinearity.clone(),
            grid,
            propagator,
            phi1_dt,
            phi2_dt,
        }
    }

    /// One ETD2RK step; non-finite results are reported as `NonFinite`.
    pub fn step(&self, state: &SpectralField) -> Result<SpectralField> {
        if let NonlinearitySpec::Zero = self.nonlinearity {
            self.check_grid(state)?;
            let mut out = state.clone();
            for (c, e) in out.coeffs_mut().iter_mut().zip(&self.propagator) {
                *c *= e;
            }
            return finite_or_err(out);
        }
        let f = &self.nonlinearity;
        self.step_with(state, |u| u.nonlinearity_eval(f))
    }

    /// ETD2RK step with an arbitrary nonlinear term in place of `f`, used
    /// for reduced systems that share the linear part.
    pub fn step_with(
        &self,
        state: &SpectralField,
        mut nonlinear: impl FnMut(&SpectralField) -> Result<SpectralField>,
    ) -> Result<SpectralField> {
        self.check_grid(state)?;
        let n0 = nonlinear(state)?;
        let mut stage = state.clone();
        for (i, c) in stage.coeffs_mut().iter_mut().enumerate() {
            *c = self.propagator[i] * *c + self.phi1_dt[i] * n0.coeffs()[i];
        }
        let n1 = nonlinear(&stage)?;
        for (i, c) in stage.coeffs_mut().iter_mut().enumerate() {
            *c += self.phi2_dt[i] * (n1.coeffs()[i] - n0.coeffs()[i]);
        }
        finite_or_err(stage)
    }

    fn check_grid(&self, state: &SpectralField) -> Result<()> {
        if state.grid() != self.grid {
            return Err(CglError::SizeMismatch {
                expected: self.grid.len(),
                actual: state.grid().len(),
            });
        }
        Ok(())
    }
}

fn finite_or_err(f: SpectralField) -> Result<SpectralField> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(CglError::NonFinite {
            context: "time step".into(),
        })
    }
}

/// Single time step of size `params.dt`.
pub fn step(state: &SpectralField, params: &CglParams) -> Result<SpectralField> {
    Integrator::new(params).step(state)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub solver: String,
    /// Steps between stored snapshots.
    pub cadence: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: CglParams,
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn new(
        params: CglParams,
        times: Vec<f64>,
        states: Vec<SpectralField>,
        provenance: Provenance,
    ) -> Result<Self> {
        if times.len() != states.len() {
            return Err(CglError::SizeMismatch {
                expected: times.len(),
                actual: states.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CglError::invalid("trajectory times must be strictly increasing"));
        }
        if states.iter().any(|s| s.grid() != params.grid) {
            return Err(CglError::invalid("trajectory states must share the parameter grid"));
        }
        Ok(Trajectory {
            params,
            times,
            states,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory holds at least one state")
    }
}

pub fn solver_name() -> String {
    format!("etd2rk/cgl-core {}", env!("CARGO_PKG_VERSION"))
}

/// Integrates from `psi0` over `[0, horizon]`, storing every `cadence`-th
/// step and always the final state. A horizon that is not a multiple of
/// `dt` ends with one shorter step.
pub fn simulate_with_cadence(
    params: &CglParams,
    psi0: &SpectralField,
    horizon: f64,
    cadence: usize,
) -> Result<Trajectory> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(CglError::invalid(format!("horizon must be non-negative, got {horizon}")));
    }
    if psi0.grid() != params.grid {
        return Err(CglError::invalid("initial state grid differs from parameter grid"));
    }
    if !psi0.is_finite() {
        return Err(CglError::NonFinite {
            context: "initial state".into(),
        });
    }
    let cadence = cadence.max(1);
    let provenance = Provenance {
        seed: None,
        solver: solver_name(),
        cadence,
    };
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    if horizon == 0.0 {
        return Trajectory::new(params.clone(), times, states, provenance);
    }

    let full_steps = (horizon / params.dt + 1e-9).floor() as usize;
    let remainder = horizon - full_steps as f64 * params.dt;
    let integrator = Integrator::new(params);
    let mut state = psi0.clone();
    let mut t = 0.0;
    for n in 1..=full_steps {
        state = advance(&integrator, &state, t)?;
        t = n as f64 * params.dt;
        if n % cadence == 0 || (n == full_steps && remainder <= 1e-12 * horizon) {
            times.push(t);
            states.push(state.clone());
        }
    }
    if remainder > 1e-12 * horizon {
        let tail = Integrator::with_step(params, remainder);
        state = advance(&tail, &state, t)?;
        times.push(horizon);
        states.push(state);
    }
    Trajectory::new(params.clone(), times, states, provenance)
}

fn advance(integrator: &Integrator, state: &SpectralField, t: f64) -> Result<SpectralField> {
    integrator.step(state).map_err(|e| match e {
        CglError::NonFinite { .. } => CglError::BlowUp {
            time: t,
            last_finite: Box::new(state.clone()),
        },
        other => other,
    })
}

/// [`simulate_with_cadence`] storing every step.
pub fn simulate(params: &CglParams, psi0: &SpectralField, horizon: f64) -> Result<Trajectory> {
    simulate_with_cadence(params, psi0, horizon, 1)
}

/// Advances without storing intermediate states.
pub fn evolve(params: &CglParams, psi0: &SpectralField, horizon: f64) -> Result<SpectralField> {
    let traj = simulate_with_cadence(params, psi0, horizon, usize::MAX)?;
    Ok(traj.last().clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub t: f64,
    pub l2: f64,
    pub h2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub rows: Vec<MonitorRow>,
    /// Times at which the supplied envelope was exceeded.
    pub violations: Vec<f64>,
}

impl MonitorReport {
    pub fn max_h2(&self) -> f64 {
        self.rows.iter().map(|r| r.h2).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,l2,h2\n");
        for r in &self.rows {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", r.t, r.l2, r.h2));
        }
        out
    }
}

pub fn dissipativity_monitor(traj: &Trajectory) -> MonitorReport {
    let rows: Vec<MonitorRow> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| MonitorRow {
            t,
            l2: s.l2_norm(),
            h2: s.sobolev_norm(2.0),
        })
        .collect();
    let mut violations = Vec::new();
    if let (Some(env), Some(first)) = (traj.params.dissip, rows.first()) {
        let t0 = first.t;
        let q0 = env.q_gain * first.h2;
        for r in &rows {
            let bound = q0 * (-env.alpha * (r.t - t0)).exp() + env.q_star;
            if r.h2 > bound * (1.0 + 1e-12) {
                violations.push(r.t);
            }
        }
    }
    MonitorReport { rows, violations }
}

/// Random data on the dealiased modes with coefficients
/// `amplitude · g_k · (1+|k|²)^{-2}`, `g_k` standard complex Gaussian.
pub fn random_initial_state(grid: GridSpec, seed: u64, amplitude: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = SpectralField::zeros(grid);
    for k in grid.retained_modes() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let weight = amplitude * std::f64::consts::FRAC_1_SQRT_2 / (1.0 + k.eigenvalue() as f64).powi(2);
        field
            .set(k, Complex64::new(re, im) * weight)
            .expect("retained modes lie on the grid");
    }
    field
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub burn_in: f64,
    /// Total number of sample points across all seeds.
    pub count: usize,
    pub spacing: f64,
    pub seeds: usize,
    pub base_seed: u64,
    pub amplitude: f64,
    /// Number of paired segments.
    pub pairs: usize,
    pub pair_window: f64,
    /// Relative `L²` size of the perturbation separating a pair.
    pub pair_perturbation: f64,
    /// Steps between stored states of pair segments.
    pub pair_cadence: usize,
    /// Enforce `ω ≠ 0`.
    pub for_mane: bool,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            burn_in: 50.0,
            count: 200,
            spacing: 1.0,
            seeds: 4,
            base_seed: 0,
            amplitude: 1.0,
            pairs: 0,
            pair_window: 10.0,
            pair_perturbation: 1e-3,
            pair_cadence: 1,
            for_mane: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AttractorSample {
    pub params: CglParams,
    pub points: Vec<SpectralField>,
    /// Time at which each point was taken along its seed's run.
    pub point_times: Vec<f64>,
    pub pair_trajectories: Vec<(Trajectory, Trajectory)>,
    pub burn_in: f64,
}

fn seed_for(base: u64, index: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 + 1)
}

pub fn sample_attractor(params: &CglParams, plan: &SamplingPlan) -> Result<AttractorSample> {
    if plan.for_mane {
        params.require_dispersion()?;
    }
    if plan.count == 0 || plan.seeds == 0 {
        return Err(CglError::invalid("sample count and seed count must be positive"));
    }
    if !(plan.burn_in >= 0.0) || !(plan.spacing > 0.0) {
        return Err(CglError::invalid("burn-in must be non-negative and spacing positive"));
    }
    let seeds = plan.seeds.min(plan.count);
    let mut points = Vec::with_capacity(plan.count);
    let mut point_times = Vec::with_capacity(plan.count);
    for s in 0..seeds {
        let per_seed = plan.count / seeds + usize::from(s < plan.count % seeds);
        let psi0 = random_initial_state(params.grid, seed_for(plan.base_seed, s), plan.amplitude);
        let mut state = evolve(params, &psi0, plan.burn_in)?;
        let mut t = plan.burn_in;
        for j in 0..per_seed {
            if j > 0 {
                state = evolve(params, &state, plan.spacing)?;
                t += plan.spacing;
            }
            points.push(state.clone());
            point_times.push(t);
        }
    }

    let mut pair_trajectories = Vec::with_capacity(plan.pairs);
    for p in 0..plan.pairs {
        let base = &points[p % points.len()];
        let mut eta = random_initial_state(params.grid, seed_for(!plan.base_seed, p), 1.0);
        let scale = plan.pair_perturbation * base.l2_norm().max(1e-300) / eta.l2_norm().max(1e-300);
        eta = eta.scale(Complex64::new(scale, 0.0));
        let other = base + &eta;
        let first = simulate_with_cadence(params, base, plan.pair_window, plan.pair_cadence)?;
        let second = simulate_with_cadence(params, &other, plan.pair_window, plan.pair_cadence)?;
        pair_trajectories.push((first, second));
    }

    Ok(AttractorSample {
        params: params.clone(),
        points,
        point_times,
        pair_trajectories,
        burn_in: plan.burn_in,
    })
}
