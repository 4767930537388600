//! Output files: study tables, field dumps and particle dumps.
//!
//! Field dumps are little-endian binary: a 32-byte header (`MODFIELD`, `d: u32`,
//! `M: u32`, snapshot count `u64`, 8 reserved bytes), then per snapshot the time
//! `t: f64` followed by the `M^d` node values with the last axis fastest.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{LabError, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::study::{corollary_report, StudyOutcome};
use crate::torus::PeriodicGrid;

pub const FIELD_MAGIC: &[u8; 8] = b"MODFIELD";

/// `rates.csv`, `replicas.csv`, `summary.json`, `config.json`, and
/// `corollary.csv` for one-dimensional studies.
pub fn write_study(dir: &Path, cfg: &ExperimentConfig, outcome: &StudyOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("rates.csv"), outcome.report.rates_csv())?;
    fs::write(dir.join("replicas.csv"), outcome.replicas_csv())?;
    let mut summary = outcome.report.summary_json();
    let (fired, above) = outcome.inclusion_counts(cfg.eta);
    summary["eta"] = cfg.eta.into();
    summary["cutoff_failures"] = fired.into();
    summary["above_eta"] = above.into();
    summary["replicas"] = cfg.replicas.into();
    summary["warnings"] = outcome.warnings.clone().into();
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::write(dir.join("config.json"), cfg.to_json() + "\n")?;
    if cfg.d == 1 {
        fs::write(dir.join("corollary.csv"), corollary_report(cfg, outcome)?.to_csv())?;
    }
    Ok(())
}

pub fn write_field_binary(path: &Path, grid: PeriodicGrid, times: &[f64], fields: &[Vec<f64>]) -> Result<()> {
    if times.len() != fields.len() || fields.iter().any(|f| f.len() != grid.len()) {
        return Err(LabError::InvalidInput("snapshot times and fields do not match the grid".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&(times.len() as u64).to_le_bytes())?;
    w.write_all(&[0u8; 8])?;
    for (t, f) in times.iter().zip(fields) {
        w.write_all(&t.to_le_bytes())?;
        for v in f {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_field_binary`]: `(grid, times, fields)`.
pub fn read_field_binary(path: &Path) -> Result<(PeriodicGrid, Vec<f64>, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 || &bytes[..8] != FIELD_MAGIC {
        return Err(LabError::InvalidInput(format!("{} is not a field dump", path.display())));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let grid = PeriodicGrid::new(u32_at(8), u32_at(12))?;
    let count = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let stride = 8 * (grid.len() + 1);
    if bytes.len() != 32 + count * stride {
        return Err(LabError::InvalidInput(format!("{} is truncated", path.display())));
    }
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let mut times = Vec::with_capacity(count);
    let mut fields = Vec::with_capacity(count);
    for s in 0..count {
        let base = 32 + s * stride;
        times.push(f64_at(base));
        fields.push((0..grid.len()).map(|i| f64_at(base + 8 * (i + 1))).collect());
    }
    Ok((grid, times, fields))
}

/// CSV with columns `t,j_1..j_d,rho`.
pub fn write_field_csv(path: &Path, grid: PeriodicGrid, times: &[f64], fields: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let idx: Vec<String> = (1..=grid.dim()).map(|a| format!("j_{a}")).collect();
    writeln!(w, "t,{},rho", idx.join(","))?;
    for (t, f) in times.iter().zip(fields) {
        for (flat, v) in f.iter().enumerate() {
            let j = grid.multi_index(flat);
            let js: Vec<String> = j[..grid.dim()].iter().map(|x| x.to_string()).collect();
            writeln!(w, "{t:e},{},{v:e}", js.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV with columns `t,i,x_1..x_d`.
pub fn write_particles_csv(path: &Path, d: usize, times: &[f64], positions: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let xs: Vec<String> = (1..=d).map(|a| format!("x_{a}")).collect();
    writeln!(w, "t,i,{}", xs.join(","))?;
    for (t, p) in times.iter().zip(positions) {
        for (i, x) in p.chunks(d).enumerate() {
            let cs: Vec<String> = x.iter().map(|c| format!("{c:e}")).collect();
            writeln!(w, "{t:e},{i},{}", cs.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Dumps of the first replica's snapshots into `dir`.
pub fn write_dumps(dir: &Path, cfg: &ExperimentConfig, outcome: &StudyOutcome, fields: bool, particles: bool) -> Result<()> {
    let Some(snap) = outcome.replicas.first().and_then(|r| r.snapshots.as_ref()) else {
        return Ok(());
    };
    let grid = cfg.grid()?;
    fs::create_dir_all(dir)?;
    if fields {
        write_field_binary(&dir.join("field_rho.bin"), grid, &snap.times, &snap.rho)?;
        for (n, f) in &snap.rho_n {
            write_field_binary(&dir.join(format!("field_rhoN_{n}.bin")), grid, &snap.times, f)?;
        }
    }
    if particles {
        for (n, p) in &snap.particles {
            write_particles_csv(&dir.join(format!("particles_{n}.csv")), cfg.d, &snap.times, p)?;
        }
    }
    Ok(())
}
