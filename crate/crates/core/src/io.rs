//! Output formats: CSV tables, canonical JSON and run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dynamics::grid::{Grid, State};
use crate::dynamics::integrate::Trajectory;
use crate::dynamics::ops;
use crate::dynamics::spec::ProblemSpec;
use crate::energy::energy_e;
use crate::error::Result;

/// Scientific notation with 17 significant digits, enough to round-trip any
/// finite value; `nan`/`inf`/`-inf` otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// One row per sample: `t,norm_u_H1,norm_v_L2,energy_E,tail_mass`, where the
/// tail mass is taken over `|x| ≥ tail_k`.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    traj: &Trajectory,
    spec: &ProblemSpec,
    tail_k: f64,
) -> Result<()> {
    let g = &spec.grid;
    writeln!(w, "t,norm_u_H1,norm_v_L2,energy_E,tail_mass")?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(ops::h1_norm_sq(g, &s.u).sqrt()),
            fmt_f64(ops::norm_sq(g, &s.v).sqrt()),
            fmt_f64(energy_e(s, spec).total),
            fmt_f64(ops::region_mass(g, s, tail_k)),
        )?;
    }
    Ok(())
}

/// Node values `x,u,v` of one state.
pub fn write_snapshot_csv<W: Write>(mut w: W, grid: &Grid, state: &State) -> Result<()> {
    writeln!(w, "x,u,v")?;
    for i in 0..grid.n_points() {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(grid.x(i)),
            fmt_f64(state.u[i]),
            fmt_f64(state.v[i])
        )?;
    }
    Ok(())
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> =
                map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Pretty JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = sort_keys(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Compact canonical form used for hashing.
pub fn canonical_json_compact<T: Serialize>(value: &T) -> Result<String> {
    let v = sort_keys(serde_json::to_value(value)?);
    Ok(serde_json::to_string(&v)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Entry describing a produced file.
#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl OutputEntry {
    pub fn from_file(root: &Path, path: &Path) -> Result<Self> {
        let data = std::fs::read(path)?;
        let rel = path.strip_prefix(root).unwrap_or(path);
        Ok(OutputEntry {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

/// Reproducibility record written next to every run's outputs.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub crate_version: String,
    pub rustc_target: String,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputEntry>,
    /// The validated configuration with defaults filled in.
    pub config: Value,
    pub notes: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, canonical_json(self)?)?;
        Ok(())
    }
}
