//! Artifact writers: deterministic CSV/JSON bodies behind a timestamp
//! header line that the regression comparator ignores.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// 17 significant digits, '.' decimal separator, no grouping.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(tag: &str) -> String {
    let ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    format!("# radonbl {tag} timestamp_ms={ms}\n")
}

/// Writes `body` behind a `# ...` header line.
pub fn write_artifact(path: &Path, tag: &str, body: &str) -> Result<(), CliError> {
    let mut text = header(tag);
    text.push_str(body);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// CSV body from a header row and numeric records.
pub fn csv_body(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
