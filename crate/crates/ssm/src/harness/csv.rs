//! CSV emission and parsing for sweep results.
//!
//! Format: UTF-8, LF line endings, header
//! `snr_db,metric,method,value,std_error,trials,errors,seed`, one row per
//! point, floating-point fields rendered with 10 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::sweep::{Metric, SweepResult, SweepRow};

pub const CSV_HEADER: &str = "snr_db,metric,method,value,std_error,trials,errors,seed";

/// Renders a float with 10 significant digits.
pub fn format_sig10(v: f64) -> String {
    format!("{v:.9e}")
}

/// Serializes a sweep result to CSV text.
pub fn emit_csv_string(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_sig10(row.snr_db),
            row.metric,
            row.method,
            format_sig10(row.value),
            format_sig10(row.std_error),
            row.trials,
            row.errors,
            row.seed
        );
    }
    out
}

/// Writes a sweep result to a CSV file.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, emit_csv_string(result))?;
    Ok(())
}

/// Parses CSV text produced by [`emit_csv_string`].
pub fn parse_csv(text: &str) -> Result<SweepResult> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "bad CSV header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Config(format!(
                "line {}: expected 8 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("line {}: bad {name}: {e}", idx + 2)))
        };
        let parse_u = |s: &str, name: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|e| Error::Config(format!("line {}: bad {name}: {e}", idx + 2)))
        };
        rows.push(SweepRow {
            snr_db: parse_f(fields[0], "snr_db")?,
            metric: Metric::parse(fields[1])?,
            method: fields[2].to_string(),
            value: parse_f(fields[3], "value")?,
            std_error: parse_f(fields[4], "std_error")?,
            trials: parse_u(fields[5], "trials")?,
            errors: parse_u(fields[6], "errors")?,
            seed: parse_u(fields[7], "seed")?,
        });
    }
    Ok(SweepResult { rows })
}

/// Emits per-curve x/y columns for external plotting: the first column is
/// `snr_db`, followed by one `method:metric` column per curve.
pub fn emit_plot_data(result: &SweepResult) -> String {
    let mut curves: Vec<(String, Metric)> = Vec::new();
    for row in &result.rows {
        let key = (row.method.clone(), row.metric);
        if !curves.contains(&key) {
            curves.push(key);
        }
    }
    let mut xs: Vec<f64> = Vec::new();
    for row in &result.rows {
        if !xs.iter().any(|&x| x == row.snr_db) {
            xs.push(row.snr_db);
        }
    }
    let mut out = String::from("snr_db");
    for (method, metric) in &curves {
        let _ = write!(out, ",{method}:{metric}");
    }
    out.push('\n');
    for &x in &xs {
        let _ = write!(out, "{}", format_sig10(x));
        for (method, metric) in &curves {
            let cell = result
                .rows
                .iter()
                .find(|r| r.snr_db == x && &r.method == method && r.metric == *metric)
                .map(|r| format_sig10(r.value))
                .unwrap_or_default();
            let _ = write!(out, ",{cell}");
        }
        out.push('\n');
    }
    out
}
