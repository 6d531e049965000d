//! CSV, summary, metadata and calibration files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::fockspace::Operator;
use crate::propagator::{AbortSnapshot, Trajectory};

pub const CSV_HEADER: &str = "t,theta,purity,parity,trace_error,min_eig";

#[derive(Debug, Error)]
pub enum CalibrationFileError {
    #[error("calibration file {path} not found")]
    Missing { path: String },
    #[error("calibration file {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn num(x: f64) -> String {
    format!("{x:.14e}")
}

/// Trajectory as CSV text; byte-identical for identical input.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(100 * (traj.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..traj.len() {
        let row = [
            traj.times[i],
            traj.theta[i],
            traj.purity[i],
            traj.parity[i],
            traj.trace_error[i],
            traj.min_eig[i],
        ];
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(traj: &Trajectory, path: &Path) -> io::Result<()> {
    fs::write(path, trajectory_csv(traj))
}

/// One row of a sweep summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub b: f64,
    pub theta_inf: f64,
    pub converged: bool,
}

/// Summary CSV with header `<parameter>,B,theta_inf,converged`.
pub fn summary_csv(parameter: &str, rows: &[SummaryRow]) -> String {
    let mut out = format!("{parameter},B,theta_inf,converged\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(r.value),
            num(r.b),
            num(r.theta_inf),
            u8::from(r.converged)
        );
    }
    out
}

/// Git blob hash: SHA-1 of `blob <len>\0<content>`.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_calibration(path: &Path, norm_scale: f64) -> io::Result<()> {
    fs::write(path, format!("norm_scale = {norm_scale:.17e}\n"))
}

pub fn read_calibration(path: &Path) -> Result<f64, CalibrationFileError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(CalibrationFileError::Missing {
                path: path.display().to_string(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let malformed = |reason: &str| CalibrationFileError::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| malformed("empty"))?;
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| malformed("expected `norm_scale = <value>`"))?;
    if k.trim() != "norm_scale" {
        return Err(malformed("expected `norm_scale = <value>`"));
    }
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| malformed("value is not a number"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(malformed("norm_scale must be positive"));
    }
    Ok(v)
}

fn matrix_text(m: &Operator) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols())
            .map(|c| format!("{:.6e}{:+.6e}i", m[(r, c)].re, m[(r, c)].im))
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Human-readable dump of an aborted run.
pub fn write_snapshot(path: &Path, reason: &str, abort: &AbortSnapshot) -> io::Result<()> {
    let r = &abort.report;
    let mut out = String::new();
    let _ = writeln!(out, "reason = {reason}");
    let _ = writeln!(out, "time = {}", abort.time);
    let _ = writeln!(out, "trace_error = {:e}", r.trace_error);
    let _ = writeln!(out, "min_eigenvalue = {:e}", r.min_eigenvalue);
    let _ = writeln!(out, "hermiticity_defect = {:e}", r.hermiticity_defect);
    let _ = writeln!(out, "purity = {}", r.purity);
    let _ = writeln!(out, "parity = {}", r.parity);
    let _ = writeln!(out, "recorded_points = {}", abort.partial.len());
    out.push_str("rho =\n");
    out.push_str(&matrix_text(&abort.rho));
    fs::write(path, out)
}
