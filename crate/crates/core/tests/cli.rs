mod common;

use std::path::Path;
use std::process::Command;

use cgl_core::cli::{parse_config_str, run_pipeline, CertificateArtifact, EstimateArtifact, RunConfig};
use cgl_core::dynamics::{simulate, CglParams};
use cgl_core::io::write_trajectory;
use cgl_core::lattice::{ShellCertificate, WaveVector};
use cgl_core::mane::{DistortionStats, TrackReport};
use cgl_core::spectral::{GridSpec, NonlinearitySpec, SpectralField};
use cgl_core::variational::EstimateReport;
use common::c;

/// Small enough to run in a second or two.
const SMALL: &str = r#"
[grid]
size = 8
[time]
horizon = 2
cadence = 5
[sample]
burn_in = 5
count = 12
seeds = 2
pairs = 3
pair_window = 2
[mane]
n_values = [2, 5]
track = 1
"#;

fn cgl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cgl"))
}

fn small_config(out: &Path) -> RunConfig {
    let mut cfg = parse_config_str(SMALL, Path::new(".")).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

#[test]
fn empty_file_gives_documented_defaults() {
    let cfg = parse_config_str("# nothing here\n", Path::new(".")).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!((cfg.omega, cfg.grid, cfg.dt, cfg.count), (1.0, 16, 0.05, 200));
}

#[test]
fn dotted_and_table_keys_are_equivalent() {
    let a = parse_config_str("model.beta = 0.25\ntime.dt = 0.01\n", Path::new(".")).unwrap();
    let b = parse_config_str("[model]\nbeta = 0.25\n[time]\ndt = 0.01\n", Path::new(".")).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.beta, a.dt), (0.25, 0.01));
}

#[test]
fn unknown_key_is_named_with_its_line() {
    let err = parse_config_str("[grid]\nsize = 8\nomega = 2.0\n", Path::new(".")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 3") && msg.contains("grid.omega"), "{msg}");

    let err = parse_config_str("omega = 2.0\n", Path::new(".")).unwrap_err();
    assert!(err.to_string().contains("unknown key 'omega'"));
}

#[test]
fn every_violation_is_reported_at_once() {
    let err = parse_config_str("[time]\ndt = 0.0\n[grid]\nsize = 7\n[model]\nbetta = 1\n", Path::new("."))
        .unwrap_err()
        .to_string();
    assert!(err.contains("time.dt must be positive"), "{err}");
    assert!(err.contains("grid.size"), "{err}");
    assert!(err.contains("model.betta"), "{err}");

    let negative = parse_config_str("time.dt = -0.1\n", Path::new(".")).unwrap_err();
    assert!(negative.to_string().contains("time.dt"));
}

#[test]
fn zero_horizon_writes_snapshot_and_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.horizon = 0.0;
    cfg.count = 1;
    let manifest = run_pipeline(&cfg).unwrap();
    assert!(manifest.degenerate);
    let names: Vec<&str> = manifest.artifacts.iter().map(|a| a.path.as_str()).collect();
    assert_eq!(names, ["snapshot.cglf"]);
    let mut files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["manifest.json", "snapshot.cglf"]);
}

#[test]
fn reruns_reproduce_the_manifest() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(&small_config(a.path())).unwrap();
    let second = run_pipeline(&small_config(b.path())).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.content_hash().unwrap(), second.content_hash().unwrap());

    let mut other = small_config(b.path());
    other.seed = 9;
    assert_ne!(run_pipeline(&other).unwrap().config_hash, first.config_hash);
}

fn read<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn pipeline_binary_writes_schema_valid_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = cgl()
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "pipeline"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let hash = String::from_utf8(status.stdout).unwrap();
    assert_eq!(hash.trim().len(), 64);

    let cert: CertificateArtifact = read(&out.join("certificate.json"));
    assert_eq!(cert.n, cert.separated[0]);
    let est: EstimateArtifact = read(&out.join("estimate.json"));
    assert_eq!(est.pairs.len(), 3);
    let dist: Vec<DistortionStats> = read(&out.join("distortion.json"));
    assert_eq!(dist.iter().map(|d| d.n).collect::<Vec<_>>(), [2, 5]);
    let track: TrackReport = read(&out.join("tracking.json"));
    assert_eq!(track.n, cert.n);
    let monitor = std::fs::read_to_string(out.join("monitor.csv")).unwrap();
    assert!(monitor.starts_with("t,l2,h2\n"));
}

#[test]
fn bad_config_exits_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "omega = 1.0\n").unwrap();
    let out = cgl()
        .args(["--config", config.to_str().unwrap(), "pipeline"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("omega"));
}

#[test]
fn certify_shell_lists_every_separated_shell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let status = cgl()
        .args(["certify-shell", "--L", "2", "--rho", "0.5", "--range", "3:6", "--truncation", "2"])
        .args(["--out", path.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let certs: Vec<ShellCertificate> = read(&path);
    assert_eq!(certs.iter().map(|c| c.n).collect::<Vec<_>>(), [3, 4, 5, 6]);
    assert!(certs.iter().all(|c| c.l == 2 && c.min_separation >= 1.0 && c.eps_bound > 0.0));
}

fn linear_pair(dir: &Path, high: bool) -> (String, String) {
    let grid = GridSpec::new(8).unwrap();
    let params = CglParams::new(1.0, NonlinearitySpec::Zero, grid, 0.05).unwrap();
    let base = SpectralField::from_modes(grid, [(WaveVector::new(1, 0, 0), c(1.0, 0.0))]).unwrap();
    let k = if high { WaveVector::new(2, 2, 0) } else { WaveVector::new(0, 1, 0) };
    let shifted = &base + &SpectralField::from_modes(grid, [(k, c(0.1, 0.0))]).unwrap();
    let paths = [dir.join("a.cglf"), dir.join("b.cglf")];
    for (psi, path) in [&base, &shifted].into_iter().zip(&paths) {
        write_trajectory(path, &simulate(&params, psi, 1.0).unwrap()).unwrap();
    }
    (paths[0].to_str().unwrap().into(), paths[1].to_str().unwrap().into())
}

#[test]
fn verify_estimate_reports_and_flags_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = linear_pair(dir.path(), false);
    let report = dir.path().join("report.json");
    let status = cgl()
        .args(["verify-estimate", "--traj", &a, "--traj2", &b, "--N", "2", "--L", "1"])
        .args(["--out", report.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let est: EstimateReport = read(&report);
    assert!(est.pass && (est.c_measured - 1.0).abs() < 1e-12);

    let (a, b) = linear_pair(dir.path(), true);
    let out = cgl()
        .args(["verify-estimate", "--traj", &a, "--traj2", &b, "--N", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outcome"], "injectivity_failure");
}
