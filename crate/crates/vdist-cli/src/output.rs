//! Result serialization: deterministic CSV files, a JSON metadata sidecar,
//! and optional gnuplot scripts for the sweep outputs.
//!
//! CSV bytes are a pure function of (config, seed): floats are written in
//! Rust's shortest round-trip decimal form and no timestamps enter the
//! table files. Run metadata (including the wall-clock timestamp) lives in
//! the JSON sidecar only, so repeated runs stay byte-comparable.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

/// Shortest round-trip decimal representation of a float. Empty cells are
/// represented by `None` upstream and never reach this function.
pub fn fmt_f64(x: f64) -> String {
    debug_assert!(x.is_finite(), "refusing to serialize non-finite value {x}");
    format!("{x}")
}

/// Write one CSV file with the given header and pre-formatted rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating output directory {}", parent.display()))?;
    }
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(header)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width must match header");
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Metadata sidecar describing one CLI run.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub runtime_seconds: f64,
    /// Seconds since the Unix epoch at write time; the only
    /// non-reproducible field, deliberately kept out of the CSVs.
    pub timestamp_unix_seconds: u64,
}

/// Write the JSON sidecar next to the CSV outputs.
pub fn write_sidecar(
    path: &Path,
    command: &str,
    master_seed: u64,
    config: serde_json::Value,
    outputs: &[PathBuf],
    runtime: Duration,
) -> Result<()> {
    let sidecar = Sidecar {
        command,
        version: env!("CARGO_PKG_VERSION"),
        master_seed,
        config,
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        runtime_seconds: runtime.as_secs_f64(),
        timestamp_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Emit a minimal gnuplot script plotting mse_mean (with error bars)
/// against the sweep abscissa, one curve per (M, L_err) pair, reading the
/// CSV this run produced.
pub fn write_gnuplot(
    path: &Path,
    csv_name: &str,
    x_label: &str,
    x_column: usize,
    logscale: bool,
) -> Result<()> {
    let mut script = String::new();
    script.push_str("set datafile separator ','\n");
    script.push_str(&format!("set xlabel '{x_label}'\n"));
    script.push_str("set ylabel 'MSE'\n");
    if logscale {
        script.push_str("set logscale xy\n");
    } else {
        script.push_str("set logscale y\n");
    }
    script.push_str("set key outside\n");
    script.push_str(&format!(
        "plot '{csv_name}' using {x_column}:6:7 skip 1 with yerrorlines title 'mse'\n"
    ));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, script).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_shortest() {
        assert_eq!(fmt_f64(0.02), "0.02");
        assert_eq!(fmt_f64(2.24e-3), "0.00224");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.3333333333333333");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_bytes_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let rows =
            vec![vec!["2".to_string(), fmt_f64(0.5)], vec!["3".to_string(), fmt_f64(1e-9)]];
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_csv(&a, &["n", "value"], &rows).unwrap();
        write_csv(&b, &["n", "value"], &rows).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let text = fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("n,value\n"));
        assert!(text.contains("3,0.000000001\n") || text.contains("3,1e-9\n"));
    }
}
