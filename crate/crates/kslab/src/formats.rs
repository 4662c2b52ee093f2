//! On-disk formats: diagnostics series (CSV), field snapshots (binary and
//! CSV) and JSON documents.
//!
//! Binary field layout, all little-endian:
//!
//! ```text
//! magic   b"KSLF"
//! version u32 = 1
//! tag     u32  geometry (0 interval, 1 rectangle, 2 radial disk, 3 radial ball)
//! nx, ny  u64
//! lx, ly  f64  (ly = 0 for one-axis grids)
//! values  nx·ny f64, row-major (index j·nx + i)
//! ```

use crate::error::{HarnessError, Result};
use kslab_core::diagnostics::DiagnosticsRecord;
use kslab_core::{Field, Geometry, Grid};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

pub const FIELD_MAGIC: &[u8; 4] = b"KSLF";
pub const FIELD_VERSION: u32 = 1;

/// Fixed leading columns of a series file, before `lp_u_<p>` and
/// `phi_<name>`.
pub const SERIES_COLUMNS: [&str; 15] = [
    "t",
    "mass_u",
    "mass_v",
    "mass_w",
    "linf_u",
    "entropy",
    "dirichlet_z",
    "energy_F",
    "fisher_u",
    "lap_z_sq",
    "grad_z_l4",
    "taxis_l1",
    "w1r_v",
    "w1r_w",
    "w1r_dist_v",
];

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn fmt_p(p: f64) -> String {
    format!("{p}")
}

/// Writes a series with columns `SERIES_COLUMNS`, `w1r_dist_w`, then
/// `lp_u_<p>` per exponent and `phi_<name>` per test function. Missing
/// distances are left empty.
pub fn write_series(path: &Path, records: &[DiagnosticsRecord], phi_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    let ps: Vec<f64> = records.first().map(|r| r.lp_u.iter().map(|(p, _)| *p).collect()).unwrap_or_default();
    let mut header: Vec<String> = SERIES_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.push("w1r_dist_w".into());
    header.extend(ps.iter().map(|p| format!("lp_u_{}", fmt_p(*p))));
    header.extend(phi_names.iter().map(|n| format!("phi_{n}")));
    w.write_record(&header).map_err(|e| HarnessError::format(path, e))?;
    let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
    for r in records {
        let mut row = vec![
            fmt(r.t),
            fmt(r.mass_u),
            fmt(r.mass_v),
            fmt(r.mass_w),
            fmt(r.linf_u),
            fmt(r.entropy),
            fmt(r.dirichlet_z),
            fmt(r.energy_f),
            fmt(r.fisher_u),
            fmt(r.lap_z_sq),
            fmt(r.grad_z_l4),
            fmt(r.taxis_l1),
            fmt(r.w1r_v),
            fmt(r.w1r_w),
            opt(r.w1r_dist_v),
            opt(r.w1r_dist_w),
        ];
        row.extend(r.lp_u.iter().map(|(_, v)| fmt(*v)));
        row.extend(r.phi.iter().map(|v| fmt(*v)));
        w.write_record(&row).map_err(|e| HarnessError::format(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// A series read back from disk, with the test-function names of its
/// `phi_<name>` columns in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub records: Vec<DiagnosticsRecord>,
    pub phi_names: Vec<String>,
}

pub fn read_series(path: &Path) -> Result<Series> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| HarnessError::format(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::format(path, format!("missing column `{name}`")))
    };
    let mut fixed = Vec::new();
    for name in SERIES_COLUMNS.iter().chain(["w1r_dist_w"].iter()) {
        fixed.push(col(name)?);
    }
    let mut lp_cols = Vec::new();
    let mut phi_cols = Vec::new();
    let mut phi_names = Vec::new();
    for (k, h) in header.iter().enumerate() {
        if let Some(p) = h.strip_prefix("lp_u_") {
            let p: f64 = p
                .parse()
                .map_err(|_| HarnessError::format(path, format!("bad exponent in column `{h}`")))?;
            lp_cols.push((p, k));
        } else if let Some(n) = h.strip_prefix("phi_") {
            phi_cols.push(k);
            phi_names.push(n.to_string());
        }
    }
    let mut records = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| HarnessError::format(path, e))?;
        let num = |k: usize| -> Result<f64> {
            row.get(k)
                .unwrap_or("")
                .parse()
                .map_err(|_| HarnessError::format(path, format!("row {}: bad number in column {}", line + 2, header[k])))
        };
        let opt = |k: usize| -> Result<Option<f64>> {
            match row.get(k).unwrap_or("") {
                "" => Ok(None),
                _ => num(k).map(Some),
            }
        };
        records.push(DiagnosticsRecord {
            t: num(fixed[0])?,
            mass_u: num(fixed[1])?,
            mass_v: num(fixed[2])?,
            mass_w: num(fixed[3])?,
            linf_u: num(fixed[4])?,
            entropy: num(fixed[5])?,
            dirichlet_z: num(fixed[6])?,
            energy_f: num(fixed[7])?,
            fisher_u: num(fixed[8])?,
            lap_z_sq: num(fixed[9])?,
            grad_z_l4: num(fixed[10])?,
            taxis_l1: num(fixed[11])?,
            w1r_v: num(fixed[12])?,
            w1r_w: num(fixed[13])?,
            w1r_dist_v: opt(fixed[14])?,
            w1r_dist_w: opt(fixed[15])?,
            lp_u: lp_cols.iter().map(|&(p, k)| num(k).map(|v| (p, v))).collect::<Result<_>>()?,
            phi: phi_cols.iter().map(|&k| num(k)).collect::<Result<_>>()?,
        });
    }
    Ok(Series { records, phi_names })
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let g = field.grid();
    let ext = g.extents();
    let ly = if g.axes() == 2 { ext[1] } else { 0.0 };
    let mut bytes = Vec::with_capacity(44 + 8 * g.len());
    bytes.extend_from_slice(FIELD_MAGIC);
    bytes.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    bytes.extend_from_slice(&g.geometry().tag().to_le_bytes());
    bytes.extend_from_slice(&(g.nx() as u64).to_le_bytes());
    bytes.extend_from_slice(&(g.ny() as u64).to_le_bytes());
    bytes.extend_from_slice(&ext[0].to_le_bytes());
    bytes.extend_from_slice(&ly.to_le_bytes());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes).map_err(|e| HarnessError::io(path, e))?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_field(path: &Path) -> Result<Field> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| HarnessError::io(path, e))?;
    let bad = |reason: &str| HarnessError::format(path, reason);
    if bytes.len() < 44 || &bytes[..4] != FIELD_MAGIC {
        return Err(bad("not a field snapshot"));
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let u64_at = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    if u32_at(4) != FIELD_VERSION {
        return Err(bad("unsupported snapshot version"));
    }
    let geometry = Geometry::from_tag(u32_at(8)).ok_or_else(|| bad("unknown geometry tag"))?;
    let (nx, ny) = (u64_at(12) as usize, u64_at(20) as usize);
    let (lx, ly) = (f64_at(28), f64_at(36));
    let grid = match geometry {
        Geometry::Interval => Grid::interval(lx, nx),
        Geometry::Rectangle => Grid::rectangle(lx, ly, nx, ny),
        Geometry::RadialDisk => Grid::radial_disk(lx, nx),
        Geometry::RadialBall => Grid::radial_ball(lx, nx),
    }?;
    let n = grid.len();
    if ny != grid.ny() || bytes.len() != 44 + 8 * n {
        return Err(bad("payload size does not match the header"));
    }
    let values = (0..n).map(|k| f64_at(44 + 8 * k)).collect();
    Ok(Field::new(Arc::new(grid), values)?)
}

/// Writes `x,y,value` per cell (`x` is the radius on radial grids, `y` is 0
/// on one-axis grids).
pub fn write_field_csv(path: &Path, field: &Field) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    w.write_record(["x", "y", "value"]).map_err(|e| HarnessError::format(path, e))?;
    let g = field.grid();
    for (k, v) in field.values().iter().enumerate() {
        let [x, y] = g.center(k);
        w.write_record([fmt(x), fmt(y), fmt(*v)])
            .map_err(|e| HarnessError::format(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e))
}

/// SHA-256 over geometry tag, cell counts, extents and cell volumes.
pub fn grid_hash(grid: &Grid) -> String {
    let mut h = Sha256::new();
    h.update(grid.geometry().tag().to_le_bytes());
    h.update((grid.nx() as u64).to_le_bytes());
    h.update((grid.ny() as u64).to_le_bytes());
    for e in grid.extents() {
        h.update(e.to_le_bytes());
    }
    for v in grid.volumes() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}
