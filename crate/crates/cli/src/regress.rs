//! Numeric comparison of two artifacts, ignoring '#' header lines.

use std::fs;
use std::path::Path;

use crate::CliError;

/// Compares two artifacts within `rtol`. `Ok(())` means equal; a
/// `Numerical` error carries the named diff.
pub fn regress(baseline: &Path, current: &Path, rtol: f64) -> Result<(), CliError> {
    let read = |p: &Path| -> Result<String, CliError> {
        fs::read_to_string(p)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))
    };
    let strip = |text: String| -> String {
        text.lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = strip(read(baseline)?);
    let b = strip(read(current)?);
    match (
        serde_json::from_str::<serde_json::Value>(&a),
        serde_json::from_str::<serde_json::Value>(&b),
    ) {
        (Ok(va), Ok(vb)) => compare_json(&va, &vb, rtol, "$"),
        _ => compare_csv(&a, &b, rtol),
    }
}

fn close(x: f64, y: f64, rtol: f64) -> bool {
    if rtol.is_infinite() {
        return true;
    }
    (x - y).abs() <= rtol * x.abs().max(y.abs())
}

fn compare_csv(a: &str, b: &str, rtol: f64) -> Result<(), CliError> {
    let rows_a: Vec<&str> = a.lines().filter(|l| !l.is_empty()).collect();
    let rows_b: Vec<&str> = b.lines().filter(|l| !l.is_empty()).collect();
    if rows_a.is_empty() || rows_b.is_empty() {
        if rows_a.len() != rows_b.len() {
            return Err(CliError::Numerical("row counts differ".into()));
        }
        return Ok(());
    }
    let header_a: Vec<&str> = rows_a[0].split(',').collect();
    let header_b: Vec<&str> = rows_b[0].split(',').collect();
    if header_a != header_b {
        return Err(CliError::Numerical(format!(
            "schema mismatch: columns {header_a:?} vs {header_b:?}"
        )));
    }
    if rows_a.len() != rows_b.len() {
        return Err(CliError::Numerical(format!(
            "row counts differ: {} vs {}",
            rows_a.len() - 1,
            rows_b.len() - 1
        )));
    }
    for (row_idx, (ra, rb)) in rows_a.iter().zip(&rows_b).enumerate().skip(1) {
        let ca: Vec<&str> = ra.split(',').collect();
        let cb: Vec<&str> = rb.split(',').collect();
        if ca.len() != cb.len() {
            return Err(CliError::Numerical(format!("row {row_idx}: cell counts differ")));
        }
        for (col, (xa, xb)) in ca.iter().zip(&cb).enumerate() {
            let name = header_a.get(col).copied().unwrap_or("?");
            match (xa.parse::<f64>(), xb.parse::<f64>()) {
                (Ok(fa), Ok(fb)) => {
                    if !close(fa, fb, rtol) {
                        return Err(CliError::Numerical(format!(
                            "column '{name}' row {row_idx}: {xa} vs {xb} (rtol {rtol:e})"
                        )));
                    }
                }
                _ => {
                    if xa != xb {
                        return Err(CliError::Numerical(format!(
                            "column '{name}' row {row_idx}: '{xa}' vs '{xb}'"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn compare_json(
    a: &serde_json::Value,
    b: &serde_json::Value,
    rtol: f64,
    path: &str,
) -> Result<(), CliError> {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (fx, fy) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if close(fx, fy, rtol) || fx.to_bits() == fy.to_bits() {
                Ok(())
            } else {
                Err(CliError::Numerical(format!("{path}: {x} vs {y} (rtol {rtol:e})")))
            }
        }
        (Value::Array(xs), Value::Array(ys)) => {
            if xs.len() != ys.len() {
                return Err(CliError::Numerical(format!(
                    "{path}: array lengths {} vs {}",
                    xs.len(),
                    ys.len()
                )));
            }
            for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                compare_json(x, y, rtol, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        (Value::Object(xm), Value::Object(ym)) => {
            if xm.len() != ym.len() || xm.keys().any(|k| !ym.contains_key(k)) {
                return Err(CliError::Numerical(format!("{path}: object keys differ")));
            }
            for (k, x) in xm {
                compare_json(x, &ym[k], rtol, &format!("{path}.{k}"))?;
            }
            Ok(())
        }
        _ => {
            if a == b {
                Ok(())
            } else {
                Err(CliError::Numerical(format!("{path}: {a} vs {b}")))
            }
        }
    }
}
