//! Atomic file output: CSV traces, field snapshots and JSON reports.

use std::io::Write;
use std::path::Path;

use acgf_core::{CoupledField, FlowTrace, Mesh};
use tempfile::NamedTempFile;

use crate::error::CliError;

pub const TRACE_HEADER: [&str; 7] =
    ["step", "time", "phi_reg", "free_energy", "rate_norm", "inner_iters", "inner_residual"];

/// Round-trip exact formatting: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e.error })?;
    Ok(())
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_trace(path: &Path, trace: &FlowTrace) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(TRACE_HEADER).map_err(csv_io)?;
        for r in &trace.records {
            c.write_record([
                r.step.to_string(),
                num(r.time),
                num(r.phi_reg),
                num(r.free_energy),
                num(r.rate_norm),
                r.inner_iters.to_string(),
                num(r.inner_residual),
            ])
            .map_err(csv_io)?;
        }
        c.flush()
    })
}

pub fn write_snapshot(path: &Path, mesh: &Mesh, u: &CoupledField) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["node_id", "x", "y", "is_boundary", "value"]).map_err(csv_io)?;
        for (i, p) in mesh.coords().iter().enumerate() {
            let b = if mesh.is_boundary(i) { "1" } else { "0" };
            c.write_record([i.to_string(), num(p[0]), num(p[1]), b.to_string(), num(u[i])]).map_err(csv_io)?;
        }
        c.flush()
    })
}

/// Plain CSV table.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(header).map_err(csv_io)?;
        for r in rows {
            c.write_record(r).map_err(csv_io)?;
        }
        c.flush()
    })
}

/// Rows of `param,e_H,e_V0,verdict`.
pub fn write_summary(path: &Path, rows: &[(String, f64, f64, bool)]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(p, eh, ev, ok)| vec![p.clone(), num(*eh), num(*ev), if *ok { "pass" } else { "fail" }.to_string()])
        .collect();
    write_rows(path, &["param", "e_H", "e_V0", "verdict"], &rows)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        w.write_all(b"\n")
    })
}
