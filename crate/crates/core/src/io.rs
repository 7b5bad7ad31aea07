//! Plain-text formats for clouds, coefficients, curves, spectra, masks,
//! measurements and solver histories.
//!
//! Floats are written with `Display`, which round-trips exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::FourierCoeffs;
use crate::irls::IterationRecord;
use crate::operators::{signed_freq, FrameMask};
use crate::surface::Polyline;

/// One row per point (column of `m`), one column per coordinate.
pub fn cloud_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("# n={} N={}\n", m.nrows(), m.ncols());
    for col in m.column_iter() {
        let row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parse a cloud written by [`cloud_to_csv`]; returns the `n x N` matrix.
/// Lines starting with `#` are ignored.
pub fn cloud_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: `{}`: {e}", lineno + 1, f.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let n = rows.first().ok_or(Error::EmptyCloud)?.len();
    Ok(DMatrix::from_fn(n, rows.len(), |d, i| rows[i][d]))
}

#[derive(Serialize, Deserialize)]
struct CoeffFile {
    dim: usize,
    half_width: usize,
    support: Vec<Vec<i64>>,
    values: Vec<[f64; 2]>,
}

/// JSON with the frequency list and `[re, im]` pairs.
pub fn coeffs_to_json(c: &FourierCoeffs) -> Result<String> {
    let file = CoeffFile {
        dim: c.dim(),
        half_width: c.support().half_width(),
        support: c.support().iter().map(|k| k.to_vec()).collect(),
        values: c.values().iter().map(|v| [v.re, v.im]).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn coeffs_from_json(text: &str) -> Result<FourierCoeffs> {
    let file: CoeffFile = serde_json::from_str(text)?;
    if file.support.len() != file.values.len() {
        return Err(Error::Parse("support and values differ in length".into()));
    }
    let terms: Vec<(Vec<i64>, Complex64)> = file
        .support
        .into_iter()
        .zip(file.values)
        .map(|(k, [re, im])| (k, Complex64::new(re, im)))
        .collect();
    let c = FourierCoeffs::from_terms(file.dim, &terms)?;
    let target = crate::geometry::cube_support(file.dim, file.half_width)?;
    if target.len() >= c.support().len() {
        c.embed(&target)
    } else {
        Ok(c)
    }
}

/// `curve,vertex,x,y` rows.
pub fn polylines_to_csv(polys: &[Polyline]) -> String {
    let mut out = String::from("curve,vertex,x,y\n");
    for (ci, p) in polys.iter().enumerate() {
        for (vi, v) in p.vertices.iter().enumerate() {
            let _ = writeln!(out, "{ci},{vi},{},{}", v[0], v[1]);
        }
    }
    out
}

/// `index,eigenvalue` rows.
pub fn eigenvalues_to_csv(values: &[f64]) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

/// `frame,fy,fx` rows with signed frequencies.
pub fn masks_to_csv(frame_shape: (usize, usize), masks: &[FrameMask]) -> String {
    let (h, w) = frame_shape;
    let mut out = String::from("frame,fy,fx\n");
    for (t, mask) in masks.iter().enumerate() {
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            let _ = writeln!(out, "{t},{},{}", signed_freq(i / w, h), signed_freq(i % w, w));
        }
    }
    out
}

/// `index,re,im` rows.
pub fn measurements_to_csv(y: &[Complex64]) -> String {
    let mut out = String::from("index,re,im\n");
    for (i, v) in y.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{}", v.re, v.im);
    }
    out
}

pub fn measurements_from_csv(text: &str) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: `{s}`: {e}", lineno + 1)))
        };
        if f.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 fields", lineno + 1)));
        }
        out.push(Complex64::new(parse(f[1])?, parse(f[2])?));
    }
    Ok(out)
}

/// `iter,data_term,surrogate,nuclear_estimate,gamma,...` rows.
pub fn history_to_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from(
        "iter,data_term,surrogate,nuclear_estimate,gamma,objective_before,objective_after,backtracks,cg_iterations,cg_converged\n",
    );
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.data_term,
            r.surrogate,
            r.nuclear_estimate,
            r.gamma,
            r.objective_before,
            r.objective_after,
            r.backtracks,
            r.cg_iterations,
            r.cg_converged
        );
    }
    out
}
