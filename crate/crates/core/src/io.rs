//! Binary persistence of spectral fields, trajectories and attractor samples.
//!
//! Every file starts with the same header, all little-endian:
//!
//! ```text
//! magic "CGLF" | version u32 | M u32 | count u64 (= M³)
//! ```
//!
//! A snapshot (version 1) is followed by `count` coefficients, each an
//! `f64` real part then an `f64` imaginary part, for wavevectors in
//! lexicographic order with every component running over `−M/2 ..= M/2−1`.
//!
//! Trajectories (version 2) and attractor samples (version 3) continue with
//! `meta_len u32`, a UTF-8 JSON metadata block of that length, then
//! `n_sequences u64` and for each sequence `n_frames u64`, `n_frames` times
//! as `f64`, and `n_frames` coefficient blocks laid out as in a snapshot.
//! A trajectory holds one sequence. A sample holds the points first, then
//! the two members of every pair in order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AttractorSample, CglParams, DissipationEnvelope, Provenance, Trajectory};
use crate::error::{CglError, Result};
use crate::lattice::{PhiSpectrum, WaveVector};
use crate::spectral::{GridSpec, NonlinearitySpec, SpectralField};

const MAGIC: &[u8; 4] = b"CGLF";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const TRAJECTORY_VERSION: u32 = 2;
pub const SAMPLE_VERSION: u32 = 3;

/// Serializable description of a nonlinearity. Pointwise closures have no
/// representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityRecord {
    Zero,
    Linear { re: f64, im: f64 },
    Cubic { beta: f64, delta: f64 },
}

impl NonlinearityRecord {
    pub fn from_spec(spec: &NonlinearitySpec) -> Result<Self> {
        Ok(match spec {
            NonlinearitySpec::Zero => NonlinearityRecord::Zero,
            NonlinearitySpec::Linear { c } => NonlinearityRecord::Linear { re: c.re, im: c.im },
            NonlinearitySpec::Cubic { beta, delta } => NonlinearityRecord::Cubic {
                beta: *beta,
                delta: *delta,
            },
            NonlinearitySpec::Pointwise { name, .. } => {
                return Err(CglError::invalid(format!(
                    "pointwise nonlinearity '{name}' cannot be serialized"
                )))
            }
        })
    }

    pub fn to_spec(&self) -> NonlinearitySpec {
        match *self {
            NonlinearityRecord::Zero => NonlinearitySpec::Zero,
            NonlinearityRecord::Linear { re, im } => NonlinearitySpec::Linear {
                c: Complex64::new(re, im),
            },
            NonlinearityRecord::Cubic { beta, delta } => NonlinearitySpec::Cubic { beta, delta },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsRecord {
    pub omega: f64,
    pub nonlinearity: NonlinearityRecord,
    pub grid: GridSpec,
    pub dt: f64,
    pub dissip: Option<DissipationEnvelope>,
}

impl ParamsRecord {
    pub fn from_params(p: &CglParams) -> Result<Self> {
        Ok(ParamsRecord {
            omega: p.omega,
            nonlinearity: NonlinearityRecord::from_spec(&p.nonlinearity)?,
            grid: p.grid,
            dt: p.dt,
            dissip: p.dissip,
        })
    }

    pub fn to_params(&self) -> Result<CglParams> {
        let mut p = CglParams::new(self.omega, self.nonlinearity.to_spec(), self.grid, self.dt)?;
        p.dissip = self.dissip;
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    params: ParamsRecord,
    provenance: Provenance,
    #[serde(default)]
    burn_in: Option<f64>,
    #[serde(default)]
    pairs: usize,
}

fn format_err(path: &Path, reason: impl Into<String>) -> CglError {
    CglError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_header<W: Write>(w: &mut W, version: u32, grid: GridSpec) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(grid.size() as u32).to_le_bytes())?;
    w.write_all(&(grid.len() as u64).to_le_bytes())?;
    Ok(())
}

fn write_coeffs<W: Write>(w: &mut W, field: &SpectralField) -> Result<()> {
    for c in field.lexicographic_coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

struct Reader<'a, R> {
    inner: R,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| format_err(self.path, format!("truncated while reading {what}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    fn header(&mut self, expected_version: u32) -> Result<GridSpec> {
        let magic: [u8; 4] = self.bytes("magic")?;
        if &magic != MAGIC {
            return Err(format_err(self.path, "bad magic, not a CGLF file"));
        }
        let version = self.u32("version")?;
        if version != expected_version {
            return Err(format_err(
                self.path,
                format!("expected format version {expected_version}, found {version}"),
            ));
        }
        let m = self.u32("grid size")? as usize;
        let grid = GridSpec::new(m).map_err(|e| format_err(self.path, e.to_string()))?;
        let count = self.u64("coefficient count")?;
        if count != grid.len() as u64 {
            return Err(format_err(
                self.path,
                format!("coefficient count {count} does not match M³ = {}", grid.len()),
            ));
        }
        Ok(grid)
    }

    fn field(&mut self, grid: GridSpec) -> Result<SpectralField> {
        let mut coeffs = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = self.f64("coefficient")?;
            let im = self.f64("coefficient")?;
            coeffs.push(Complex64::new(re, im));
        }
        SpectralField::from_lexicographic(grid, &coeffs)
    }

    fn metadata(&mut self) -> Result<Metadata> {
        let len = self.u32("metadata length")? as usize;
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| format_err(self.path, "truncated metadata"))?;
        serde_json::from_slice(&buf).map_err(|e| format_err(self.path, format!("metadata: {e}")))
    }

    fn sequence(&mut self, grid: GridSpec) -> Result<(Vec<f64>, Vec<SpectralField>)> {
        let n = self.u64("frame count")? as usize;
        // guard against absurd counts before allocating
        if n > (1 << 32) {
            return Err(format_err(self.path, format!("implausible frame count {n}")));
        }
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            times.push(self.f64("time")?);
        }
        let mut states = Vec::with_capacity(n);
        for _ in 0..n {
            states.push(self.field(grid)?);
        }
        Ok((times, states))
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(format_err(self.path, "trailing bytes after payload")),
        }
    }
}

fn open<'a>(path: &'a Path) -> Result<Reader<'a, BufReader<File>>> {
    Ok(Reader {
        inner: BufReader::new(File::open(path)?),
        path,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_snapshot(path: &Path, field: &SpectralField) -> Result<()> {
    let mut w = create(path)?;
    write_header(&mut w, SNAPSHOT_VERSION, field.grid())?;
    write_coeffs(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SpectralField> {
    let mut r = open(path)?;
    let grid = r.header(SNAPSHOT_VERSION)?;
    let field = r.field(grid)?;
    r.expect_eof()?;
    Ok(field)
}

fn write_sequence<W: Write>(w: &mut W, times: &[f64], states: &[SpectralField]) -> Result<()> {
    w.write_all(&(times.len() as u64).to_le_bytes())?;
    for t in times {
        w.write_all(&t.to_le_bytes())?;
    }
    for s in states {
        write_coeffs(w, s)?;
    }
    Ok(())
}

fn write_metadata<W: Write>(w: &mut W, meta: &Metadata) -> Result<()> {
    let json = serde_json::to_vec(meta)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let meta = Metadata {
        params: ParamsRecord::from_params(&traj.params)?,
        provenance: traj.provenance.clone(),
        burn_in: None,
        pairs: 0,
    };
    let mut w = create(path)?;
    write_header(&mut w, TRAJECTORY_VERSION, traj.params.grid)?;
    write_metadata(&mut w, &meta)?;
    w.write_all(&1u64.to_le_bytes())?;
    write_sequence(&mut w, &traj.times, &traj.states)?;
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut r = open(path)?;
    let grid = r.header(TRAJECTORY_VERSION)?;
    let meta = r.metadata()?;
    let params = checked_params(&meta, grid, path)?;
    let n_seq = r.u64("sequence count")?;
    if n_seq != 1 {
        return Err(format_err(path, format!("trajectory must hold one sequence, found {n_seq}")));
    }
    let (times, states) = r.sequence(grid)?;
    r.expect_eof()?;
    Trajectory::new(params, times, states, meta.provenance).map_err(|e| format_err(path, e.to_string()))
}

fn checked_params(meta: &Metadata, grid: GridSpec, path: &Path) -> Result<CglParams> {
    if meta.params.grid != grid {
        return Err(format_err(path, "metadata grid differs from header grid"));
    }
    meta.params.to_params().map_err(|e| format_err(path, e.to_string()))
}

pub fn write_sample(path: &Path, sample: &AttractorSample) -> Result<()> {
    let provenance = sample
        .pair_trajectories
        .first()
        .map(|p| p.0.provenance.clone())
        .unwrap_or_else(|| Provenance {
            seed: None,
            solver: crate::dynamics::solver_name(),
            cadence: 1,
        });
    let meta = Metadata {
        params: ParamsRecord::from_params(&sample.params)?,
        provenance,
        burn_in: Some(sample.burn_in),
        pairs: sample.pair_trajectories.len(),
    };
    let mut w = create(path)?;
    write_header(&mut w, SAMPLE_VERSION, sample.params.grid)?;
    write_metadata(&mut w, &meta)?;
    w.write_all(&(1 + 2 * sample.pair_trajectories.len() as u64).to_le_bytes())?;
    write_sequence(&mut w, &sample.point_times, &sample.points)?;
    for (a, b) in &sample.pair_trajectories {
        write_sequence(&mut w, &a.times, &a.states)?;
        write_sequence(&mut w, &b.times, &b.states)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sample(path: &Path) -> Result<AttractorSample> {
    let mut r = open(path)?;
    let grid = r.header(SAMPLE_VERSION)?;
    let meta = r.metadata()?;
    let params = checked_params(&meta, grid, path)?;
    let n_seq = r.u64("sequence count")?;
    if n_seq != 1 + 2 * meta.pairs as u64 {
        return Err(format_err(
            path,
            format!("expected {} sequences for {} pairs, found {n_seq}", 1 + 2 * meta.pairs, meta.pairs),
        ));
    }
    let (point_times, points) = r.sequence(grid)?;
    let mut pair_trajectories = Vec::with_capacity(meta.pairs);
    for _ in 0..meta.pairs {
        let mut member = || -> Result<Trajectory> {
            let (t, s) = r.sequence(grid)?;
            Trajectory::new(params.clone(), t, s, meta.provenance.clone())
                .map_err(|e| format_err(path, e.to_string()))
        };
        let a = member()?;
        let b = member()?;
        pair_trajectories.push((a, b));
    }
    r.expect_eof()?;
    Ok(AttractorSample {
        params,
        points,
        point_times,
        pair_trajectories,
        burn_in: meta.burn_in.unwrap_or(0.0),
    })
}

/// Reads Fourier data of a multiplier from text: one `k1 k2 k3 re im`
/// entry per line, `#` starting a comment. Repeated wavevectors add up.
pub fn read_phi_file(path: &Path, truncation: i32) -> Result<PhiSpectrum> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = || format_err(path, format!("line {}: expected 'k1 k2 k3 re im'", i + 1));
        if fields.len() != 5 {
            return Err(bad());
        }
        let k: Vec<i32> = fields[..3].iter().map(|f| f.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let re: f64 = fields[3].parse().map_err(|_| bad())?;
        let im: f64 = fields[4].parse().map_err(|_| bad())?;
        entries.push((WaveVector::new(k[0], k[1], k[2]), Complex64::new(re, im)));
    }
    PhiSpectrum::new(truncation, entries)
}
