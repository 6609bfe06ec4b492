//! Snapshot files: a JSON header plus a sidecar of row-major little-endian `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::grid::Grid;

pub const FORMAT_VERSION: u32 = 1;

/// JSON header describing one stored field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format_version: u32,
    pub grid: Grid,
    pub time_tag: f64,
    pub units: String,
    /// Sidecar file name, relative to the header.
    pub data: String,
    /// Lowercase hex SHA-256 of the sidecar bytes.
    pub checksum: String,
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes `value` as pretty JSON atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn encode(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `<stem>.json` and `<stem>.bin` into `dir`; returns the header path.
pub fn write_snapshot(dir: &Path, stem: &str, time: f64, units: &str, grid: &Grid, values: &[f64]) -> Result<PathBuf> {
    let bytes = encode(values);
    let data = format!("{stem}.bin");
    write_atomic(&dir.join(&data), &bytes)?;
    let header = SnapshotHeader {
        format_version: FORMAT_VERSION,
        grid: grid.clone(),
        time_tag: time,
        units: units.to_string(),
        data,
        checksum: sha256_hex(&bytes),
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &header)?;
    Ok(path)
}

/// Reads a header and its sidecar, verifying length and checksum.
pub fn read_snapshot(header_path: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let header: SnapshotHeader = read_json(header_path)?;
    header.grid.validate()?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&header.data))?;
    if sha256_hex(&bytes) != header.checksum {
        return Err(Error::Checksum(header.data.clone()));
    }
    if bytes.len() != 8 * header.grid.len() {
        return Err(Error::GridMismatch(format!("{} holds {} bytes for {} cells", header.data, bytes.len(), header.grid.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok((header, values))
}

pub fn write_field(dir: &Path, stem: &str, time: f64, field: &DensityField) -> Result<PathBuf> {
    write_snapshot(dir, stem, time, "mass per unit volume", field.grid(), field.values())
}

pub fn read_field(header_path: &Path) -> Result<(f64, DensityField)> {
    let (header, values) = read_snapshot(header_path)?;
    Ok((header.time_tag, DensityField::new(header.grid, values)?))
}

/// Per-cell CSV with header `x,value` or `x,y,value`.
pub fn field_csv(field: &DensityField) -> String {
    let g = field.grid();
    let mut out = String::from(if g.dim() == 1 { "x,value\n" } else { "x,y,value\n" });
    for (p, v) in g.centers().zip(field.values()) {
        if g.dim() == 1 {
            out.push_str(&format!("{},{}\n", p[0], v));
        } else {
            out.push_str(&format!("{},{},{}\n", p[0], p[1], v));
        }
    }
    out
}
