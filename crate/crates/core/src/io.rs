//! CSV export and sample import.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! identical inputs give identical bytes.

use std::io::Write;

use crate::domain::AcquisitionDomain;
use crate::error::{Error, Result};
use crate::estimator::MtEstimate;
use crate::process::Autocovariance;
use crate::slepian::TaperSet;

fn numbered(prefix: &str, n: usize, first: usize) -> Vec<String> {
    (first..first + n).map(|i| format!("{prefix}{i}")).collect()
}

/// `point_index,coord_1..coord_d,taper_0..taper_{K−1}` and a trailing
/// `# eigenvalues:` line.
pub fn write_tapers_csv(mut w: impl Write, tapers: &TaperSet) -> Result<()> {
    let domain = tapers.domain();
    let mut header = vec!["point_index".to_string()];
    header.extend(numbered("coord_", domain.dim(), 1));
    header.extend(numbered("taper_", tapers.count(), 0));
    writeln!(w, "{}", header.join(","))?;
    for (i, p) in domain.points().iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.coords().iter().map(i64::to_string));
        row.extend(tapers.tapers().iter().map(|t| t[i].to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    let ev: Vec<String> = tapers.eigenvalues().iter().map(f64::to_string).collect();
    writeln!(w, "# eigenvalues: {}", ev.join(","))?;
    Ok(())
}

/// `xi_1..xi_d,S_hat` over the estimate's grid, row-major.
pub fn write_estimate_csv(mut w: impl Write, est: &MtEstimate) -> Result<()> {
    let grid = est.grid();
    let mut header = numbered("xi_", grid.dim(), 1);
    header.push("S_hat".into());
    writeln!(w, "{}", header.join(","))?;
    for (i, v) in est.grid_values().iter().enumerate() {
        let mut row: Vec<String> = grid.point(i).iter().map(f64::to_string).collect();
        row.push(v.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `lag_1..lag_d,sigma_hat`, lexicographic.
pub fn write_lags_csv(mut w: impl Write, lags: &Autocovariance) -> Result<()> {
    let mut header = numbered("lag_", lags.dim(), 1);
    header.push("sigma_hat".into());
    writeln!(w, "{}", header.join(","))?;
    for (lag, v) in lags.iter() {
        let mut row: Vec<String> = lag.iter().map(i64::to_string).collect();
        row.push(v.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `coord_1..coord_d,value` in the domain's canonical order.
pub fn write_sample_csv(mut w: impl Write, domain: &AcquisitionDomain, values: &[f64]) -> Result<()> {
    if values.len() != domain.cardinality() {
        return Err(Error::DimensionMismatch { expected: domain.cardinality(), actual: values.len() });
    }
    let mut header = numbered("coord_", domain.dim(), 1);
    header.push("value".into());
    writeln!(w, "{}", header.join(","))?;
    for (p, v) in domain.points().iter().zip(values) {
        let mut row: Vec<String> = p.coords().iter().map(i64::to_string).collect();
        row.push(v.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a sample for `domain`. Accepts either `d + 1` columns
/// (`coords…,value`, any row order, every domain point exactly once) or a
/// single column of `N` values in canonical order. Blank lines, `#` comments
/// and a non-numeric header line are skipped.
pub fn read_sample(text: &str, domain: &AcquisitionDomain) -> Result<Vec<f64>> {
    let d = domain.dim();
    let n = domain.cardinality();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push((lineno + 1, v)),
            Err(_) if rows.is_empty() => continue,
            Err(e) => return Err(Error::Parse { line: lineno + 1, message: e.to_string() }),
        }
    }
    let width = rows.first().map_or(1, |r| r.1.len());
    if let Some((line, r)) = rows.iter().find(|r| r.1.len() != width) {
        return Err(Error::Parse { line: *line, message: format!("expected {width} fields, found {}", r.len()) });
    }
    if rows.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: rows.len() });
    }
    if width == 1 {
        return Ok(rows.into_iter().map(|r| r.1[0]).collect());
    }
    if width != d + 1 {
        return Err(Error::Parse { line: rows[0].0, message: format!("expected 1 or {} fields, found {width}", d + 1) });
    }
    let mut values = vec![f64::NAN; n];
    for (line, r) in rows {
        let coords: Vec<i64> = r[..d].iter().map(|c| c.round() as i64).collect();
        if r[..d].iter().zip(&coords).any(|(a, b)| *a != *b as f64) {
            return Err(Error::Parse { line, message: "coordinates must be integers".into() });
        }
        let i = domain
            .index_of(&coords)
            .ok_or_else(|| Error::Parse { line, message: format!("point {coords:?} is not in the domain") })?;
        if !values[i].is_nan() {
            return Err(Error::Parse { line, message: format!("point {coords:?} listed twice") });
        }
        values[i] = r[d];
    }
    Ok(values)
}
