//! Deterministic file emission: CSV time series, legacy-VTK snapshots with a
//! CSV twin, and the run manifest.
//!
//! Floating-point fields are printed with 17 significant digits, so parsing
//! them back recovers the exact binary64 values and identical runs produce
//! byte-identical files.

use crate::analysis::StepRecord;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fem::{Field, FemSpace};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const TIMESERIES_HEADER: &str =
    "n,t,energy,lumped_energy,mass,max_norm,radius,newton_iters,linear_iters,lbfgs_iters,energy_law_residual";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Renders the per-step records as CSV text.
pub fn timeseries_to_string(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 160);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.t),
            fmt_f64(r.energy),
            fmt_opt(r.lumped_energy),
            fmt_f64(r.mass),
            fmt_f64(r.max_norm),
            fmt_opt(r.radius),
            r.newton_iters,
            r.linear_iters,
            r.lbfgs_iters.map(|v| v.to_string()).unwrap_or_default(),
            fmt_f64(r.energy_law_residual),
        );
    }
    out
}

/// Writes the time series CSV.
pub fn emit_timeseries(records: &[StepRecord], path: &Path) -> Result<()> {
    write_text(path, &timeseries_to_string(records))
}

/// Parses a time series CSV produced by [`emit_timeseries`].
pub fn parse_timeseries(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty time series".into()))?;
    if header != TIMESERIES_HEADER {
        return Err(Error::Config(format!("unexpected header '{header}'")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(Error::Config(format!(
                "row {}: expected 11 columns, got {}",
                i + 2,
                cols.len()
            )));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("row {}: bad float '{s}'", i + 2)))
        };
        let opt_f = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                f(s).map(Some)
            }
        };
        let u = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Config(format!("row {}: bad count '{s}'", i + 2)))
        };
        records.push(StepRecord {
            n: u(cols[0])?,
            t: f(cols[1])?,
            energy: f(cols[2])?,
            lumped_energy: opt_f(cols[3])?,
            mass: f(cols[4])?,
            max_norm: f(cols[5])?,
            radius: opt_f(cols[6])?,
            newton_iters: u(cols[7])?,
            linear_iters: u(cols[8])?,
            lbfgs_iters: if cols[9].is_empty() {
                None
            } else {
                Some(u(cols[9])?)
            },
            energy_law_residual: f(cols[10])?,
        });
    }
    Ok(records)
}

/// Renders a nodal field as a legacy ASCII VTK unstructured grid.
pub fn snapshot_vtk_string(space: &FemSpace, field: &Field, name: &str) -> String {
    let mesh = &space.mesh;
    let n = mesh.num_nodes();
    let m = mesh.num_elements();
    let mut out = String::with_capacity(64 * n);
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "{name}");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(out, "{} {} 0.0", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    let _ = writeln!(out, "CELLS {m} {}", 4 * m);
    for el in &mesh.elements {
        let _ = writeln!(out, "3 {} {} {}", el[0], el[1], el[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {m}");
    for _ in 0..m {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    out.push_str("SCALARS u double 1\nLOOKUP_TABLE default\n");
    for &v in &field.0 {
        let _ = writeln!(out, "{}", fmt_f64(v));
    }
    out
}

/// Renders the `(x, y, u)` CSV twin of a snapshot.
pub fn snapshot_csv_string(space: &FemSpace, field: &Field) -> String {
    let mut out = String::from("x,y,u\n");
    for (p, &v) in space.mesh.nodes.iter().zip(&field.0) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(v));
    }
    out
}

/// Writes `<base>.vtk` and the `<base>.csv` twin.
pub fn emit_snapshot(space: &FemSpace, field: &Field, base: &Path) -> Result<()> {
    if field.len() != space.num_nodes() {
        return Err(Error::Config(format!(
            "snapshot field has {} values, mesh has {} nodes",
            field.len(),
            space.num_nodes()
        )));
    }
    let name = base
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snapshot".into());
    write_text(
        &base.with_extension("vtk"),
        &snapshot_vtk_string(space, field, &name),
    )?;
    write_text(
        &base.with_extension("csv"),
        &snapshot_csv_string(space, field),
    )
}

/// Writes the run manifest: package version, seed and the canonical echo of
/// the parsed configuration.
pub fn write_manifest(cfg: &RunConfig, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# run manifest");
    let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "seed = {}", cfg.initial.seed());
    out.push_str(&cfg.echo());
    write_text(path, &out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{generate_uniform, Rect};

    fn records() -> Vec<StepRecord> {
        vec![
            StepRecord {
                n: 0,
                t: 0.0,
                energy: 178.2598123456789,
                lumped_energy: None,
                mass: -0.001234,
                max_norm: 1.0,
                radius: Some(0.6),
                newton_iters: 0,
                linear_iters: 0,
                lbfgs_iters: None,
                energy_law_residual: 0.0,
            },
            StepRecord {
                n: 1,
                t: 5e-4,
                energy: 177.0,
                lumped_energy: Some(177.1),
                mass: -0.0012341,
                max_norm: 0.9999999,
                radius: None,
                newton_iters: 3,
                linear_iters: 42,
                lbfgs_iters: Some(17),
                energy_law_residual: -1.25e-9,
            },
        ]
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(
            timeseries_to_string(&[]),
            format!("{TIMESERIES_HEADER}\n")
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let rs = records();
        let text = timeseries_to_string(&rs);
        let back = parse_timeseries(&text).unwrap();
        assert_eq!(back, rs);
        // Deterministic bytes.
        assert_eq!(text, timeseries_to_string(&rs));
    }

    #[test]
    fn snapshot_counts_and_constants() {
        let space = assemble(generate_uniform(1, 1, Rect::unit()).unwrap()).unwrap();
        let field = Field::constant(4, 0.25);
        let vtk = snapshot_vtk_string(&space, &field, "snap");
        assert!(vtk.contains("POINTS 4 double"));
        assert!(vtk.contains("CELLS 2 8"));
        assert!(vtk.contains("CELL_TYPES 2"));
        assert!(vtk.contains("POINT_DATA 4"));
        assert_eq!(vtk.matches("2.5000000000000000e-1").count(), 4);

        let csv = snapshot_csv_string(&space, &field);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("x,y,u\n"));
    }

    #[test]
    fn files_written_under_new_directories() {
        let dir = tempfile::tempdir().unwrap();
        let space = assemble(generate_uniform(2, 2, Rect::unit()).unwrap()).unwrap();
        let base = dir.path().join("nested/deep/snap_0001");
        emit_snapshot(&space, &Field::zeros(9), &base).unwrap();
        assert!(base.with_extension("vtk").exists());
        assert!(base.with_extension("csv").exists());
        emit_timeseries(&records(), &dir.path().join("ts/series.csv")).unwrap();
    }
}
