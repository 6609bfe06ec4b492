//! Trajectory directories: `manifest.json`, one header and sidecar per snapshot, and
//! `diagnostics.csv`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Provenance, RunStats, Snapshot, TrajectoryRecord};
use crate::diagnostics::{diagnostics_csv, diagnostics_row};
use crate::error::{invalid, Result};
use crate::io::{read_field, read_json, write_atomic, write_field, write_json, FORMAT_VERSION};

pub const MANIFEST: &str = "manifest.json";
pub const DIAGNOSTICS: &str = "diagnostics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub time: f64,
    /// Header file name relative to the directory.
    pub header: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: String,
    pub provenance: Provenance,
    pub stats: RunStats,
    pub snapshots: Vec<SnapshotEntry>,
    pub diagnostics: String,
}

/// Writes the trajectory into `dir` (created if missing); every file is written atomically.
pub fn write_trajectory(dir: &Path, traj: &TrajectoryRecord) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(traj.snapshots.len());
    for (k, s) in traj.snapshots.iter().enumerate() {
        let stem = format!("snapshot_{k:05}");
        write_field(dir, &stem, s.time, &s.field)?;
        entries.push(SnapshotEntry { time: s.time, header: format!("{stem}.json") });
    }
    let csv = diagnostics_csv(&traj.diagnostics, &traj.schedule().diagnostic_exponents);
    write_atomic(&dir.join(DIAGNOSTICS), csv.as_bytes())?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: "splitting".into(),
        provenance: traj.provenance.clone(),
        stats: traj.stats,
        snapshots: entries,
        diagnostics: DIAGNOSTICS.into(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

/// Reads a trajectory directory, verifying snapshot checksums; diagnostics are recomputed.
pub fn read_trajectory(dir: &Path) -> Result<TrajectoryRecord> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(invalid(format!("unsupported format version {}", manifest.format_version)));
    }
    if manifest.snapshots.is_empty() {
        return Err(invalid("manifest lists no snapshots"));
    }
    let snapshots = manifest
        .snapshots
        .iter()
        .map(|e| read_field(&dir.join(&e.header)).map(|(time, field)| Snapshot { time, field }))
        .collect::<Result<Vec<_>>>()?;
    let mut traj = TrajectoryRecord { snapshots, diagnostics: Vec::new(), provenance: manifest.provenance, stats: manifest.stats };
    let drift = traj.drift()?;
    let p = traj.schedule().diffusion;
    let qs = traj.schedule().diagnostic_exponents.clone();
    traj.diagnostics = traj.snapshots.iter().map(|s| diagnostics_row(&s.field, &drift, s.time, p.m, p.epsilon, &qs)).collect();
    Ok(traj)
}
