//! Command-line front end and the end-to-end pipeline.
//!
//! Subcommands read their defaults from `--config` when given and from
//! [`RunConfig::default`] otherwise; explicit flags win over both.
//! `--out` names the output file for single-artifact subcommands and the
//! output directory for `pipeline`.
//!
//! Exit status is 0 on success, 1 on a failed computation, 2 on bad usage
//! or configuration, and 3 when `verify-estimate` finds the projection
//! collapsing the pair. Failures print `{"error": kind, "message": ...}` to
//! stderr.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{parse_config, parse_config_str, RunConfig};

use crate::dynamics::{
    dissipativity_monitor, evolve, random_initial_state, sample_attractor, simulate_with_cadence, solver_name,
    CglParams, SamplingPlan, Trajectory,
};
use crate::error::{CglError, Result};
use crate::io;
use crate::lattice::{schur_bound, search_separated_n, PhiSpectrum, ShellCertificate, WaveVector};
use crate::mane::{distortion_stats, track_error, DistortionStats, InertialForm, LiftSettings, TrackReport};
use crate::spectral::SpectralField;
use crate::variational::{
    linearize_coefficients, measure_backward_lipschitz, smallness_report, LipschitzMeasurement, LipschitzSettings,
    SmallnessReport,
};

#[derive(Debug, Parser)]
#[command(name = "cgl", version, about = "Complex Ginzburg-Landau simulation and averaging diagnostics")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 keeps the default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate from random initial data and write the trajectory.
    Simulate(SimulateArgs),
    /// Search separated shells and bound the restricted multiplier.
    CertifyShell(CertifyArgs),
    /// Measure the backward estimate on a pair of trajectories.
    VerifyEstimate(EstimateArgs),
    /// Distortion of the low-mode projection on an attractor sample.
    ManeCheck(ManeArgs),
    /// Track the full flow with the reduced system built from a sample.
    InertialForm(InertialArgs),
    /// Run every stage and write a manifest.
    Pipeline,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub cadence: Option<usize>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Also write the `t,l2,h2` monitor next to the trajectory.
    #[arg(long)]
    pub monitor: bool,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long = "L")]
    pub l: Option<u64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Inclusive search range `a:b`.
    #[arg(long)]
    pub range: Option<String>,
    /// Fourier file of φ; without it the bound is for unit coefficients.
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long)]
    pub truncation: Option<i32>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub traj2: PathBuf,
    #[arg(long = "N")]
    pub n: u64,
    #[arg(long = "L")]
    pub l: Option<u64>,
    /// Keep only the final `window` time units of both trajectories.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long = "bound-c")]
    pub bound_c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ManeArgs {
    #[arg(long)]
    pub sample: PathBuf,
    #[arg(long = "N")]
    pub n: u64,
    /// Pairs to draw at random; 0 uses every pair.
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InertialArgs {
    #[arg(long)]
    pub sample: PathBuf,
    #[arg(long = "N")]
    pub n: u64,
    #[arg(long)]
    pub track: Option<f64>,
    /// Time the first sample point is evolved before tracking starts.
    #[arg(long, default_value_t = 0.5)]
    pub start: f64,
}

/// Outcome of a subcommand that did not fail outright.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    InjectivityFailure,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn checked(cfg: RunConfig) -> Result<RunConfig> {
    cfg.validate()?;
    Ok(cfg)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn dump_blow_up(err: &CglError, path: &Path) {
    if let CglError::BlowUp { time, last_finite } = err {
        match io::write_snapshot(path, last_finite) {
            Ok(()) => log::error!("blow-up at t = {time}; last finite state written to {}", path.display()),
            Err(e) => log::error!("blow-up at t = {time}; could not write last finite state: {e}"),
        }
    }
}

fn parse_range(s: &str) -> Result<(u64, u64)> {
    let bad = || CglError::Config(format!("range '{s}' must look like a:b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// `φ̂ = 1` on every nonzero wavevector with `|k_i| ≤ truncation`; the
/// resulting bound scales with `sup |φ̂|` for any other multiplier.
fn unit_phi(truncation: i32) -> Result<PhiSpectrum> {
    let t = truncation;
    let mut entries = Vec::new();
    for a in -t..=t {
        for b in -t..=t {
            for c in -t..=t {
                let k = WaveVector::new(a, b, c);
                if k != WaveVector::ZERO {
                    entries.push((k, Complex64::new(1.0, 0.0)));
                }
            }
        }
    }
    PhiSpectrum::new(t, entries)
}

/// Fourier data of `field` restricted to `|k_i| ≤ truncation`.
fn phi_from_field(field: &SpectralField, truncation: i32) -> Result<PhiSpectrum> {
    PhiSpectrum::new(
        truncation,
        field
            .modes()
            .filter(|(k, c)| k.max_abs() <= truncation && c.norm() > 0.0),
    )
}

fn simulate_cmd(cfg: &RunConfig, args: &SimulateArgs, out: Option<&Path>) -> Result<Status> {
    let mut cfg = cfg.clone();
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => { $( if let Some(v) = args.$arg { cfg.$field = v; } )* };
    }
    set!(omega <- omega, beta <- beta, delta <- delta, grid <- grid, dt <- dt, horizon <- horizon,
         cadence <- cadence, amplitude <- amplitude);
    let cfg = checked(cfg)?;
    let params = cfg.params()?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("trajectory.cglf"));
    let psi0 = random_initial_state(params.grid, cfg.seed, cfg.amplitude);
    let mut traj = match simulate_with_cadence(&params, &psi0, cfg.horizon, cfg.cadence) {
        Ok(t) => t,
        Err(e) => {
            dump_blow_up(&e, &path.with_extension("last.cglf"));
            return Err(e);
        }
    };
    traj.provenance.seed = Some(cfg.seed);
    io::write_trajectory(&path, &traj)?;
    if args.monitor {
        let report = dissipativity_monitor(&traj);
        fs::write(path.with_extension("csv"), report.to_csv())?;
        for t in &report.violations {
            log::warn!("dissipation envelope exceeded at t = {t}");
        }
    }
    info!("wrote {} snapshots to {}", traj.len(), path.display());
    Ok(Status::Ok)
}

fn certify_cmd(cfg: &RunConfig, args: &CertifyArgs, out: Option<&Path>) -> Result<Status> {
    let l = args.l.unwrap_or(cfg.shell_l);
    let rho = args.rho.unwrap_or(cfg.rho);
    let (lo, hi) = match &args.range {
        Some(r) => parse_range(r)?,
        None => (cfg.n_min, cfg.n_max),
    };
    let truncation = args.truncation.unwrap_or(cfg.phi_truncation);
    let phi = match args.phi.as_ref().or(cfg.phi.as_ref()) {
        Some(path) => io::read_phi_file(path, truncation)?,
        None => unit_phi(truncation)?,
    };
    let certificates = search_separated_n(l, rho, lo, hi)?
        .into_iter()
        .map(|n| schur_bound(&phi, n, l, rho))
        .collect::<Result<Vec<ShellCertificate>>>()?;
    emit(out, &to_json(&certificates)?)?;
    Ok(Status::Ok)
}

/// The final `window` time units of `traj`.
fn tail(traj: &Trajectory, window: f64) -> Result<Trajectory> {
    let t_end = *traj.times.last().ok_or_else(|| CglError::invalid("empty trajectory"))?;
    let start = traj
        .times
        .iter()
        .position(|&t| t >= t_end - window - 1e-9 * (1.0 + t_end.abs()))
        .unwrap_or(0);
    Trajectory::new(
        traj.params.clone(),
        traj.times[start..].to_vec(),
        traj.states[start..].to_vec(),
        traj.provenance.clone(),
    )
}

/// `K/L` with `K` the C¹ bound of the linearization along `traj`.
fn k_over_l(traj: &Trajectory, l: u64) -> Result<(f64, f64)> {
    let k = linearize_coefficients(traj, &traj.params.nonlinearity)?.k_bound;
    Ok((k, k / l as f64))
}

fn estimate_cmd(cfg: &RunConfig, args: &EstimateArgs, out: Option<&Path>) -> Result<Status> {
    let mut first = io::read_trajectory(&args.traj)?;
    let mut second = io::read_trajectory(&args.traj2)?;
    if let Some(w) = args.window {
        first = tail(&first, w)?;
        second = tail(&second, w)?;
    }
    let settings = LipschitzSettings {
        bound_c: args.bound_c.unwrap_or(cfg.bound_c),
        tolerance: cfg.estimate_tolerance,
        ..LipschitzSettings::default()
    };
    let l = args.l.unwrap_or(cfg.shell_l).max(1);
    match measure_backward_lipschitz(&first, &second, args.n, &settings)? {
        LipschitzMeasurement::Estimate(mut report) => {
            report.contraction_factor = k_over_l(&first, l)?.1;
            emit(out, &to_json(&report)?)?;
            Ok(Status::Ok)
        }
        failure => {
            emit(out, &to_json(&failure)?)?;
            Ok(Status::InjectivityFailure)
        }
    }
}

fn subsample(count: usize, seed: u64) -> Option<(usize, u64)> {
    (count > 0).then_some((count, seed))
}

fn mane_cmd(cfg: &RunConfig, args: &ManeArgs, out: Option<&Path>) -> Result<Status> {
    let sample = io::read_sample(&args.sample)?;
    let stats = distortion_stats(&sample.points, args.n, subsample(args.subsample.unwrap_or(cfg.subsample), cfg.seed))?;
    emit(out, &to_json(&stats)?)?;
    Ok(Status::Ok)
}

fn inertial_cmd(cfg: &RunConfig, args: &InertialArgs, out: Option<&Path>) -> Result<Status> {
    let sample = io::read_sample(&args.sample)?;
    let params = sample.params.clone();
    let start = evolve(&params, &sample.points[0], args.start)?;
    let settings = LiftSettings {
        neighbours: cfg.neighbours,
        ..LiftSettings::default()
    };
    let form = InertialForm::new(sample.points, args.n, settings)?;
    let report = track_error(&form, &params, args.track.unwrap_or(cfg.track), &start)?;
    emit(out, &to_json(&report)?)?;
    Ok(Status::Ok)
}

/// `certificate.json`: the shell search and the certificate for the chosen `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateArtifact {
    #[serde(rename = "L")]
    pub l: u64,
    pub rho: f64,
    pub range: (u64, u64),
    pub separated: Vec<u64>,
    #[serde(rename = "N")]
    pub n: u64,
    /// `"file"` or `"linearization"`: where φ came from.
    pub phi_source: String,
    pub certificate: ShellCertificate,
    pub smallness: SmallnessReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEstimate {
    pub index: usize,
    pub full: LipschitzMeasurement,
    /// Same pair restricted to the half of the window nearest `t = 0`.
    pub half_window: LipschitzMeasurement,
}

/// `estimate.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArtifact {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "K")]
    pub k: f64,
    pub contraction_factor: f64,
    pub window: f64,
    pub pairs: Vec<PairEstimate>,
    /// Largest `C_measured` over pairs with an estimate; `null` if none.
    pub max_c_measured: Option<f64>,
    pub pass_count: usize,
    pub injectivity_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// `manifest.json`. Paths are relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub solver: String,
    pub config_hash: String,
    pub seed: u64,
    pub degenerate: bool,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    /// SHA-256 of the serialized manifest.
    pub fn content_hash(&self) -> Result<String> {
        Ok(sha256_hex(to_json(self)?.as_bytes()))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the configuration as JSON; the output directory is excluded.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(cfg)?))
}

struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        fs::write(self.path(name), to_json(value)?)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    fn entries(&self) -> Result<Vec<ArtifactEntry>> {
        self.written
            .iter()
            .map(|name| {
                let bytes = fs::read(self.path(name))?;
                Ok(ArtifactEntry {
                    path: name.clone(),
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                })
            })
            .collect()
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CglError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn check_monitor_csv(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let bad = |reason: String| CglError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some("t,l2,h2") {
        return Err(bad("missing header 't,l2,h2'".into()));
    }
    for (i, line) in lines.enumerate() {
        let ok = line.split(',').count() == 3 && line.split(',').all(|f| f.parse::<f64>().is_ok());
        if !ok {
            return Err(bad(format!("row {}: expected three numbers", i + 1)));
        }
    }
    Ok(())
}

/// Reads every artifact back through its typed reader.
fn validate_artifacts(dir: &Path, manifest: &Manifest) -> Result<()> {
    for entry in &manifest.artifacts {
        let path = dir.join(&entry.path);
        match entry.path.as_str() {
            "snapshot.cglf" => drop(io::read_snapshot(&path)?),
            "trajectory.cglf" => drop(io::read_trajectory(&path)?),
            "sample.cglf" => drop(io::read_sample(&path)?),
            "monitor.csv" => check_monitor_csv(&path)?,
            "certificate.json" => drop(read_json::<CertificateArtifact>(&path)?),
            "estimate.json" => drop(read_json::<EstimateArtifact>(&path)?),
            "distortion.json" => drop(read_json::<Vec<DistortionStats>>(&path)?),
            "tracking.json" => drop(read_json::<TrackReport>(&path)?),
            other => return Err(CglError::invalid(format!("unexpected artifact {other}"))),
        }
    }
    let back: Manifest = read_json(&dir.join("manifest.json"))?;
    if &back != manifest {
        return Err(CglError::Format {
            path: dir.join("manifest.json"),
            reason: "manifest does not read back identically".into(),
        });
    }
    Ok(())
}

fn finish(out: OutDir, cfg: &RunConfig, degenerate: bool) -> Result<Manifest> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        solver: solver_name(),
        config_hash: config_hash(cfg)?,
        seed: cfg.seed,
        degenerate,
        artifacts: out.entries()?,
    };
    fs::write(out.path("manifest.json"), to_json(&manifest)?)?;
    validate_artifacts(&out.root, &manifest)?;
    Ok(manifest)
}

fn sampling_plan(cfg: &RunConfig) -> SamplingPlan {
    SamplingPlan {
        burn_in: cfg.burn_in,
        count: cfg.count,
        spacing: cfg.spacing,
        seeds: cfg.seeds,
        base_seed: cfg.seed,
        amplitude: cfg.amplitude,
        pairs: cfg.pairs,
        pair_window: cfg.pair_window,
        pair_perturbation: cfg.pair_perturbation,
        pair_cadence: cfg.cadence,
        for_mane: true,
    }
}

/// Runs every stage in order and writes the artifacts plus `manifest.json`
/// into `cfg.out`. A zero horizon writes only the initial snapshot.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let params = cfg.params()?;
    fs::create_dir_all(&cfg.out)?;
    let mut out = OutDir {
        root: cfg.out.clone(),
        written: Vec::new(),
    };
    let psi0 = random_initial_state(params.grid, cfg.seed, cfg.amplitude);
    if cfg.horizon == 0.0 {
        io::write_snapshot(&out.path("snapshot.cglf"), &psi0)?;
        out.record("snapshot.cglf");
        return finish(out, cfg, true);
    }

    let separated = search_separated_n(cfg.shell_l, cfg.rho, cfg.n_min, cfg.n_max)?;
    let n = match cfg.shell_n {
        Some(n) => n,
        None => *separated.first().ok_or_else(|| {
            CglError::invalid(format!(
                "no N in [{}, {}] has an (N, {}) shell with separation above {}",
                cfg.n_min, cfg.n_max, cfg.shell_l, cfg.rho
            ))
        })?,
    };
    info!("N = {n}, L = {}", cfg.shell_l);

    let traj = reference_trajectory(&params, &psi0, cfg, &out.path("last_finite.cglf"))?;
    io::write_trajectory(&out.path("trajectory.cglf"), &traj)?;
    out.record("trajectory.cglf");
    let monitor = dissipativity_monitor(&traj);
    out.text("monitor.csv", &monitor.to_csv())?;

    let coeffs = linearize_coefficients(&traj, &params.nonlinearity)?;
    let (phi, phi_source) = match &cfg.phi {
        Some(path) => (io::read_phi_file(path, cfg.phi_truncation)?, "file"),
        None => (phi_from_field(coeffs.a.last().expect("nonempty"), cfg.phi_truncation)?, "linearization"),
    };
    let certificate = schur_bound(&phi, n, cfg.shell_l, cfg.rho)?;
    let smallness = smallness_report(n, cfg.shell_l, cfg.omega, coeffs.k_bound, cfg.eps)?;
    out.json(
        "certificate.json",
        &CertificateArtifact {
            l: cfg.shell_l,
            rho: cfg.rho,
            range: (cfg.n_min, cfg.n_max),
            separated,
            n,
            phi_source: phi_source.into(),
            certificate,
            smallness,
        },
    )?;

    let sample = sample_attractor(&params, &sampling_plan(cfg))?;
    io::write_sample(&out.path("sample.cglf"), &sample)?;
    out.record("sample.cglf");
    info!("sampled {} points and {} pairs", sample.points.len(), sample.pair_trajectories.len());

    out.json("estimate.json", &estimate_artifact(cfg, n, coeffs.k_bound, &sample.pair_trajectories)?)?;

    let n_values = if cfg.mane_n_values.is_empty() {
        vec![n]
    } else {
        cfg.mane_n_values.clone()
    };
    let stats = n_values
        .iter()
        .map(|&m| distortion_stats(&sample.points, m, subsample(cfg.subsample, cfg.seed)))
        .collect::<Result<Vec<_>>>()?;
    out.json("distortion.json", &stats)?;

    let start = evolve(&params, &sample.points[0], 0.5 * cfg.spacing)?;
    let settings = LiftSettings {
        neighbours: cfg.neighbours,
        ..LiftSettings::default()
    };
    let form = InertialForm::new(sample.points, n, settings)?;
    out.json("tracking.json", &track_error(&form, &params, cfg.track, &start)?)?;

    finish(out, cfg, false)
}

/// Burn-in followed by the stored run of length `horizon`.
fn reference_trajectory(params: &CglParams, psi0: &SpectralField, cfg: &RunConfig, dump: &Path) -> Result<Trajectory> {
    let run = || -> Result<Trajectory> {
        let start = evolve(params, psi0, cfg.burn_in)?;
        let mut traj = simulate_with_cadence(params, &start, cfg.horizon, cfg.cadence)?;
        traj.provenance.seed = Some(cfg.seed);
        Ok(traj)
    };
    run().inspect_err(|e| dump_blow_up(e, dump))
}

fn estimate_artifact(cfg: &RunConfig, n: u64, k: f64, pairs: &[(Trajectory, Trajectory)]) -> Result<EstimateArtifact> {
    let settings = LipschitzSettings {
        bound_c: cfg.bound_c,
        tolerance: cfg.estimate_tolerance,
        ..LipschitzSettings::default()
    };
    let contraction_factor = k / cfg.shell_l as f64;
    let with_factor = |m: LipschitzMeasurement| match m {
        LipschitzMeasurement::Estimate(mut r) => {
            r.contraction_factor = contraction_factor;
            LipschitzMeasurement::Estimate(r)
        }
        other => other,
    };
    let mut out = Vec::with_capacity(pairs.len());
    for (index, (first, second)) in pairs.iter().enumerate() {
        let full = measure_backward_lipschitz(first, second, n, &settings)?;
        let half = 0.5 * cfg.pair_window;
        let half_window = measure_backward_lipschitz(&tail(first, half)?, &tail(second, half)?, n, &settings)?;
        out.push(PairEstimate {
            index,
            full: with_factor(full),
            half_window: with_factor(half_window),
        });
    }
    let reports: Vec<_> = out
        .iter()
        .filter_map(|p| match &p.full {
            LipschitzMeasurement::Estimate(r) => Some(r),
            _ => None,
        })
        .collect();
    Ok(EstimateArtifact {
        n,
        l: cfg.shell_l,
        k,
        contraction_factor,
        window: cfg.pair_window,
        max_c_measured: reports.iter().map(|r| r.c_measured).reduce(f64::max),
        pass_count: reports.iter().filter(|r| r.pass).count(),
        injectivity_failures: out.len() - reports.len(),
        pairs: out,
    })
}

fn execute(cli: &Cli) -> Result<Status> {
    let cfg = load_config(cli)?;
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate(args) => simulate_cmd(&cfg, args, out),
        Command::CertifyShell(args) => certify_cmd(&cfg, args, out),
        Command::VerifyEstimate(args) => estimate_cmd(&cfg, args, out),
        Command::ManeCheck(args) => mane_cmd(&cfg, args, out),
        Command::InertialForm(args) => inertial_cmd(&cfg, args, out),
        Command::Pipeline => {
            let manifest = run_pipeline(&cfg)?;
            println!("{}", manifest.content_hash()?);
            Ok(Status::Ok)
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(Status::Ok) => 0,
        Ok(Status::InjectivityFailure) => 3,
        Err(e) => {
            let report = ErrorReport {
                error: e.kind(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            match e {
                CglError::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

/// Entry point of the `cgl` binary.
pub fn main_entry() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("CGL_LOG", "warn")).try_init();
    run(std::env::args_os())
}
