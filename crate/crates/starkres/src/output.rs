//! CSV and manifest persistence. Floats are written with 17 significant digits.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::Value;
use starkres_core::sweep::SweepPoint;

pub const CSV_HEADER: [&str; 6] = ["f", "re_z", "im_z", "residual", "winding", "trajectory_id"];

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_points(path: &Path, points: &[SweepPoint]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record([
            fmt_float(p.f),
            fmt_float(p.z.re),
            fmt_float(p.z.im),
            fmt_float(p.residual),
            opt(p.winding),
            opt(p.trajectory),
        ])?;
    }
    w.flush()
}

pub fn write_eigenvalues(path: &Path, points: &[SweepPoint], target: num_complex::Complex64) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["f", "re_lambda", "im_lambda", "residual", "sensitivity", "distance_to_target"])?;
    for p in points {
        w.write_record([
            fmt_float(p.f),
            fmt_float(p.z.re),
            fmt_float(p.z.im),
            fmt_float(p.residual),
            p.sensitivity.map(fmt_float).unwrap_or_default(),
            fmt_float((p.z - target).norm()),
        ])?;
    }
    w.flush()
}

/// One row of a results CSV, as read back for plotting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvPoint {
    pub f: f64,
    pub re: f64,
    pub im: f64,
}

pub fn read_points(path: &Path) -> Result<Vec<CsvPoint>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("{}: missing column '{name}'", path.display()))
    };
    let (cf, cre, cim) = (col("f")?, col("re_z")?, col("im_z")?);
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |c: usize| -> Result<f64, String> {
            rec.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| format!("{}: row {}: bad number", path.display(), n + 2))
        };
        out.push(CsvPoint {
            f: num(cf)?,
            re: num(cre)?,
            im: num(cim)?,
        });
    }
    Ok(out)
}

pub fn write_json(path: &Path, value: &Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn complex_json(z: num_complex::Complex64) -> Value {
    serde_json::json!({ "re": z.re, "im": z.im })
}
