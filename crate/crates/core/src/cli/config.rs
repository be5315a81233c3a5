//! Run configuration.
//!
//! Configuration files are TOML. Every key belongs to a section and may be
//! written either inside a `[section]` table or dotted (`model.omega = 1`).
//! Unknown keys are rejected, and all problems are reported together.
//!
//! | key                        | default | meaning                                        |
//! |----------------------------|---------|------------------------------------------------|
//! | `model.omega`              | 1.0     | cross-diffusion coefficient ω                  |
//! | `model.beta`               | 0.5     | linear coefficient β of the cubic nonlinearity |
//! | `model.delta`              | 1.0     | cubic coefficient δ                            |
//! | `grid.size`                | 16      | grid points per axis, even and ≥ 4             |
//! | `time.dt`                  | 0.05    | time step                                      |
//! | `time.horizon`             | 20.0    | length of the reference trajectory; 0 skips all analysis |
//! | `time.cadence`             | 10      | steps between stored snapshots                 |
//! | `shell.l`                  | 1       | half-width L of the intermediate shell         |
//! | `shell.rho`                | 0.5     | required point separation                      |
//! | `shell.n_min`, `shell.n_max` | 2, 20 | search range for N                             |
//! | `shell.n`                  | unset   | fixed N; otherwise the first passing N         |
//! | `shell.phi`                | unset   | Fourier file of φ for the Schur bound          |
//! | `shell.phi_truncation`     | 16      | largest admissible `|k_i|` in that file        |
//! | `shell.eps`                | 0.01    | smallness target ε                             |
//! | `sample.burn_in`           | 50.0    | time discarded before sampling                 |
//! | `sample.count`             | 200     | attractor points over all seeds                |
//! | `sample.spacing`           | 1.0     | time between points of one run                 |
//! | `sample.seeds`             | 4       | independent initial conditions                 |
//! | `sample.amplitude`         | 1.0     | size of random initial data                    |
//! | `sample.pairs`             | 20      | paired segments for the backward estimate      |
//! | `sample.pair_window`       | 10.0    | length of each paired segment                  |
//! | `sample.pair_perturbation` | 1e-3    | relative separation of a pair at its start     |
//! | `estimate.bound_c`         | 10.0    | target constant C                              |
//! | `estimate.tolerance`       | 1e-9    | relative slack on the estimate                 |
//! | `mane.n_values`            | `[N]`   | truncations for the distortion statistics      |
//! | `mane.subsample`           | 0       | pairs to draw; 0 uses all pairs                |
//! | `mane.track`               | 5.0     | tracking horizon of the inertial form          |
//! | `mane.neighbours`          | 8       | neighbours of the local reconstruction         |
//! | `monitor.alpha`, `monitor.q_star`, `monitor.q_gain` | unset | optional dissipation envelope |
//! | `run.seed`                 | 0       | base seed (`--seed` overrides)                 |
//! | `run.threads`              | 0       | worker threads, 0 for the default              |
//! | `run.out`                  | `cgl-out` | output directory (`--out` overrides)         |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{CglParams, DissipationEnvelope};
use crate::error::{CglError, Result};
use crate::spectral::GridSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub omega: f64,
    pub beta: f64,
    pub delta: f64,
    pub grid: usize,
    pub dt: f64,
    pub horizon: f64,
    pub cadence: usize,
    pub shell_l: u64,
    pub rho: f64,
    pub n_min: u64,
    pub n_max: u64,
    pub shell_n: Option<u64>,
    pub phi: Option<PathBuf>,
    pub phi_truncation: i32,
    pub eps: f64,
    pub burn_in: f64,
    pub count: usize,
    pub spacing: f64,
    pub seeds: usize,
    pub amplitude: f64,
    pub pairs: usize,
    pub pair_window: f64,
    pub pair_perturbation: f64,
    pub bound_c: f64,
    pub estimate_tolerance: f64,
    pub mane_n_values: Vec<u64>,
    pub subsample: usize,
    pub track: f64,
    pub neighbours: usize,
    pub dissip: Option<DissipationEnvelope>,
    pub seed: u64,
    pub threads: usize,
    /// Not part of the configuration hash.
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            omega: 1.0,
            beta: 0.5,
            delta: 1.0,
            grid: 16,
            dt: 0.05,
            horizon: 20.0,
            cadence: 10,
            shell_l: 1,
            rho: 0.5,
            n_min: 2,
            n_max: 20,
            shell_n: None,
            phi: None,
            phi_truncation: 16,
            eps: 0.01,
            burn_in: 50.0,
            count: 200,
            spacing: 1.0,
            seeds: 4,
            amplitude: 1.0,
            pairs: 20,
            pair_window: 10.0,
            pair_perturbation: 1e-3,
            bound_c: 10.0,
            estimate_tolerance: 1e-9,
            mane_n_values: Vec::new(),
            subsample: 0,
            track: 5.0,
            neighbours: 8,
            dissip: None,
            seed: 0,
            threads: 0,
            out: PathBuf::from("cgl-out"),
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<CglParams> {
        let mut p = CglParams::cubic(self.omega, self.beta, self.delta, GridSpec::new(self.grid)?, self.dt)?;
        p.dissip = self.dissip;
        Ok(p)
    }

    /// Every violated constraint, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        need(self.omega.is_finite() && self.omega != 0.0, "model.omega must be finite and nonzero");
        need(self.beta.is_finite(), "model.beta must be finite");
        need(self.delta.is_finite(), "model.delta must be finite");
        need(self.grid >= 4 && self.grid % 2 == 0, "grid.size must be even and at least 4");
        need(self.dt > 0.0 && self.dt.is_finite(), "time.dt must be positive");
        need(self.horizon >= 0.0 && self.horizon.is_finite(), "time.horizon must be non-negative");
        need(self.cadence >= 1, "time.cadence must be at least 1");
        need(self.shell_l >= 1, "shell.l must be at least 1");
        need(self.rho > 0.0, "shell.rho must be positive");
        need(self.n_min > self.shell_l, "shell.n_min must exceed shell.l");
        need(self.n_max >= self.n_min, "shell.n_max must be at least shell.n_min");
        if let Some(n) = self.shell_n {
            need(n > self.shell_l, "shell.n must exceed shell.l");
        }
        need(self.eps > 0.0, "shell.eps must be positive");
        need(self.burn_in >= 0.0, "sample.burn_in must be non-negative");
        need(self.count >= 1, "sample.count must be at least 1");
        if self.horizon > 0.0 {
            need(self.count >= 2, "sample.count must be at least 2 when analysis runs");
        }
        need(self.spacing > 0.0, "sample.spacing must be positive");
        need(self.seeds >= 1, "sample.seeds must be at least 1");
        need(self.amplitude > 0.0, "sample.amplitude must be positive");
        need(self.pair_window >= self.dt, "sample.pair_window must cover at least one step");
        need(self.pair_perturbation > 0.0, "sample.pair_perturbation must be positive");
        need(self.bound_c > 0.0, "estimate.bound_c must be positive");
        need(self.estimate_tolerance >= 0.0, "estimate.tolerance must be non-negative");
        need(self.mane_n_values.iter().all(|&n| n >= 1), "mane.n_values must be positive");
        need(self.track >= 0.0, "mane.track must be non-negative");
        need(self.neighbours >= 1, "mane.neighbours must be at least 1");
        if let Some(d) = self.dissip {
            need(d.alpha > 0.0 && d.q_star >= 0.0 && d.q_gain > 0.0, "monitor envelope needs alpha > 0, q_star ≥ 0, q_gain > 0");
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CglError::Config(format!("invalid configuration:\n  - {}", v.join("\n  - "))))
        }
    }
}

/// Maps dotted key names to the line they were written on.
fn key_lines(text: &str) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            section = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim().trim_matches('"');
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            out.entry(full).or_insert(i + 1);
        }
    }
    out
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let name = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&name, t, out),
            other => {
                out.insert(name, other.clone());
            }
        }
    }
}

struct Reader {
    values: BTreeMap<String, toml::Value>,
    problems: Vec<String>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.values.remove(key)
    }

    fn f64(&mut self, key: &str, slot: &mut f64) {
        match self.take(key) {
            None => {}
            Some(toml::Value::Float(x)) => *slot = x,
            Some(toml::Value::Integer(i)) => *slot = i as f64,
            Some(other) => self.problems.push(format!("{key}: expected a number, found {}", other.type_str())),
        }
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        let mut x = f64::NAN;
        let present = self.values.contains_key(key);
        self.f64(key, &mut x);
        (present && !x.is_nan()).then_some(x)
    }

    fn u64(&mut self, key: &str, slot: &mut u64) {
        match self.take(key) {
            None => {}
            Some(toml::Value::Integer(i)) if i >= 0 => *slot = i as u64,
            Some(other) => self
                .problems
                .push(format!("{key}: expected a non-negative integer, found {other}")),
        }
    }

    fn usize(&mut self, key: &str, slot: &mut usize) {
        let mut x = *slot as u64;
        self.u64(key, &mut x);
        *slot = x as usize;
    }

    fn opt_u64(&mut self, key: &str) -> Option<u64> {
        let present = self.values.contains_key(key);
        let mut x = u64::MAX;
        self.u64(key, &mut x);
        (present && x != u64::MAX).then_some(x)
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.take(key) {
            None => None,
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => {
                self.problems.push(format!("{key}: expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn u64_list(&mut self, key: &str, slot: &mut Vec<u64>) {
        match self.take(key) {
            None => {}
            Some(toml::Value::Array(items)) => {
                let mut out = Vec::new();
                for it in items {
                    match it {
                        toml::Value::Integer(i) if i >= 0 => out.push(i as u64),
                        other => {
                            self.problems.push(format!("{key}: list entries must be non-negative integers, found {other}"));
                            return;
                        }
                    }
                }
                *slot = out;
            }
            Some(other) => self.problems.push(format!("{key}: expected a list, found {}", other.type_str())),
        }
    }
}

/// Parses and validates configuration text; `base` resolves relative paths.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CglError::Config(format!("parse error: {e}")))?;
    let mut values = BTreeMap::new();
    flatten("", &table, &mut values);
    let lines = key_lines(text);
    let mut r = Reader {
        values,
        problems: Vec::new(),
    };
    let mut c = RunConfig::default();
    r.f64("model.omega", &mut c.omega);
    r.f64("model.beta", &mut c.beta);
    r.f64("model.delta", &mut c.delta);
    r.usize("grid.size", &mut c.grid);
    r.f64("time.dt", &mut c.dt);
    r.f64("time.horizon", &mut c.horizon);
    r.usize("time.cadence", &mut c.cadence);
    r.u64("shell.l", &mut c.shell_l);
    r.f64("shell.rho", &mut c.rho);
    r.u64("shell.n_min", &mut c.n_min);
    r.u64("shell.n_max", &mut c.n_max);
    c.shell_n = r.opt_u64("shell.n");
    c.phi = r.string("shell.phi").map(|p| base.join(p));
    let mut trunc = c.phi_truncation as u64;
    r.u64("shell.phi_truncation", &mut trunc);
    c.phi_truncation = trunc.min(i32::MAX as u64) as i32;
    r.f64("shell.eps", &mut c.eps);
    r.f64("sample.burn_in", &mut c.burn_in);
    r.usize("sample.count", &mut c.count);
    r.f64("sample.spacing", &mut c.spacing);
    r.usize("sample.seeds", &mut c.seeds);
    r.f64("sample.amplitude", &mut c.amplitude);
    r.usize("sample.pairs", &mut c.pairs);
    r.f64("sample.pair_window", &mut c.pair_window);
    r.f64("sample.pair_perturbation", &mut c.pair_perturbation);
    r.f64("estimate.bound_c", &mut c.bound_c);
    r.f64("estimate.tolerance", &mut c.estimate_tolerance);
    r.u64_list("mane.n_values", &mut c.mane_n_values);
    r.usize("mane.subsample", &mut c.subsample);
    r.f64("mane.track", &mut c.track);
    r.usize("mane.neighbours", &mut c.neighbours);
    let alpha = r.opt_f64("monitor.alpha");
    let q_star = r.opt_f64("monitor.q_star");
    let q_gain = r.opt_f64("monitor.q_gain");
    match (alpha, q_star) {
        (Some(alpha), Some(q_star)) => {
            c.dissip = Some(DissipationEnvelope {
                alpha,
                q_star,
                q_gain: q_gain.unwrap_or(1.0),
            })
        }
        (None, None) if q_gain.is_none() => {}
        _ => r.problems.push("monitor: alpha and q_star must be given together".into()),
    }
    r.u64("run.seed", &mut c.seed);
    r.usize("run.threads", &mut c.threads);
    if let Some(out) = r.string("run.out") {
        c.out = base.join(out);
    }

    let mut problems = std::mem::take(&mut r.problems);
    for key in r.values.keys() {
        match lines.get(key) {
            Some(line) => problems.push(format!("line {line}: unknown key '{key}'")),
            None => problems.push(format!("unknown key '{key}'")),
        }
    }
    problems.extend(c.violations());
    if problems.is_empty() {
        Ok(c)
    } else {
        Err(CglError::Config(format!("invalid configuration:\n  - {}", problems.join("\n  - "))))
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}
