//! CSV and binary writers. CSVs are UTF-8 with `.` decimals and `\n` rows.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use skewdim::dimension::CurvePoint;
use skewdim::empirics::PointCloud;
use skewdim::thermodynamics::PressureEstimate;

use crate::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// Rows `(M, n, P_n, extrapolated)`, one per truncation and depth.
pub fn write_pressure_csv(
    path: &Path,
    estimates: &[(u64, PressureEstimate)],
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["M", "n", "P_n", "extrapolated"])?;
    for (m, est) in estimates {
        for (i, p) in est.depth_values.iter().enumerate() {
            w.write_record([
                m.to_string(),
                (i + 1).to_string(),
                p.to_string(),
                est.extrapolated.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Rows `(s, delta, flag)`.
pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["s", "delta", "flag"])?;
    for p in curve {
        w.write_record([p.s.to_string(), p.delta.to_string(), p.flag.clone()])?;
    }
    w.flush().map_err(io_err(path))
}

/// Rows `(x1, ..., xd)`.
pub fn write_cloud_csv(path: &Path, cloud: &PointCloud) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record((1..=cloud.dim).map(|i| format!("x{i}")))?;
    for p in cloud.iter() {
        w.write_record(p.iter().map(|x| x.to_string()))?;
    }
    w.flush().map_err(io_err(path))
}

/// Coordinates as consecutive little-endian `f64`s, row-major.
pub fn write_cloud_binary(path: &Path, cloud: &PointCloud) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for x in &cloud.points {
        out.write_all(&x.to_le_bytes()).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn in_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
