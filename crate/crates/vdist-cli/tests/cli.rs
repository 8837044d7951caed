//! End-to-end smoke tests that drive the compiled `vdist` binary exactly
//! the way a user would: config files in, CSV/JSON artifacts out, exit
//! codes checked. Statistical assertions here are deterministic because
//! every run is pinned to a fixed seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdist"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn run_ok(args: &[&str]) -> Output {
    let out = vdist(args);
    assert!(
        out.status.success(),
        "`vdist {}` failed:\nstdout: {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Write a small loss-channel MSE sweep config and return its path.
fn write_mse_config(
    dir: &Path,
    seed: u64,
    samples: usize,
    n_grid: &[usize],
    m_grid: &[u32],
    l_grid: &[usize],
    eps_grid: &[f64],
) -> PathBuf {
    let cfg = serde_json::json!({
        "channel": {"type": "loss"},
        "n_grid": n_grid,
        "m_grid": m_grid,
        "l_err_grid": l_grid,
        "eps_grid": eps_grid,
        "circuit": "haar",
        "samples": samples,
        "master_seed": seed,
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Parse a CSV produced by the binary into (header, rows) of plain strings.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().expect("header line").split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("column {name} missing from {header:?}"))
}

#[test]
fn help_lists_every_subcommand() {
    let out = run_ok(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["mse-sweep", "delay-sweep", "tables", "hellinger", "special-case", "verify"] {
        assert!(text.contains(sub), "--help output is missing `{sub}`:\n{text}");
    }
}

#[test]
fn mse_sweep_writes_csv_sidecar_and_gnuplot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mse_config(dir.path(), 11, 6, &[2], &[1, 2], &[1, 2], &[0.02, 0.04]);
    let out_dir = dir.path().join("out");
    run_ok(&[
        "mse-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--gnuplot",
    ]);

    let (header, rows) = read_csv(&out_dir.join("mse_sweep.csv"));
    assert_eq!(
        header,
        ["n", "m", "l_err", "eps_or_tau", "eps", "mse_mean", "mse_stderr", "samples", "trace_deficit_mean"]
    );
    assert_eq!(rows.len(), 2 * 2 * 2, "one row per (m, l_err, eps) grid point");
    let samples_col = column(&header, "samples");
    assert!(rows.iter().all(|r| r[samples_col] == "6"));

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("mse_sweep.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["command"], "mse-sweep");
    assert_eq!(sidecar["master_seed"], 11);
    let outputs: Vec<&str> =
        sidecar["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"mse_sweep.csv"));
    assert!(outputs.contains(&"mse_sweep.csv.gnuplot"));

    let script = fs::read_to_string(out_dir.join("mse_sweep.csv.gnuplot")).unwrap();
    assert!(script.contains("set logscale xy"));
    assert!(script.contains("mse_sweep.csv"));
}

#[test]
fn csv_bytes_are_identical_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mse_config(dir.path(), 23, 8, &[2], &[1, 2], &[1, 2], &[0.02]);
    for (threads, sub) in [("1", "a"), ("4", "b")] {
        run_ok(&[
            "mse-sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            dir.path().join(sub).to_str().unwrap(),
        ]);
    }
    let a = fs::read(dir.path().join("a/mse_sweep.csv")).unwrap();
    let b = fs::read(dir.path().join("b/mse_sweep.csv")).unwrap();
    assert_eq!(a, b, "sweep CSV must not depend on the worker count");
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(
        &path,
        r#"{
            "channel": {"type": "loss"},
            "n_grid": [2], "m_grid": [1], "l_err_grid": [1],
            "eps_grid": [0.02], "circuit": "haar",
            "samples": 4, "master_seed": 1,
            "surprise": true
        }"#,
    )
    .unwrap();
    let out = vdist(&[
        "mse-sweep",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(!out.status.success(), "misspelled config keys must not be silently ignored");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("surprise"), "error should name the offending field:\n{stderr}");
}

#[test]
fn invalid_sample_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = vdist(&[
        "mse-sweep",
        "--samples",
        "0",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("samples"), "{stderr}");
}

#[test]
fn zero_rate_rows_are_exactly_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mse_config(dir.path(), 5, 5, &[2, 3], &[1, 2], &[1], &[0.0]);
    let out_dir = dir.path().join("out");
    run_ok(&["mse-sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let (header, rows) = read_csv(&out_dir.join("mse_sweep.csv"));
    let (mean, stderr, trace) = (
        column(&header, "mse_mean"),
        column(&header, "mse_stderr"),
        column(&header, "trace_deficit_mean"),
    );
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row[mean], "0", "zero noise must give an MSE of exactly zero: {row:?}");
        assert_eq!(row[stderr], "0");
        assert_eq!(row[trace], "1");
    }
}

#[test]
fn delay_sweep_zero_dwell_row_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "channel": {"type": "loss_decay", "gamma_db": 3.0},
        "n_grid": [2],
        "m_grid": [1],
        "l_err_grid": [1],
        "tau_grid": [0.0, 0.2],
        "tau_unit": "ns",
        "circuit": "hardware_efficient",
        "samples": 4,
        "master_seed": 9,
    });
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "delay-sweep",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--gnuplot",
    ]);

    let sidecar: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out_dir.join("delay_sweep.csv.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["config"]["tau_unit"], "ns", "the delay unit label must reach the sidecar");
    let script = fs::read_to_string(out_dir.join("delay_sweep.csv.gnuplot")).unwrap();
    assert!(script.contains("dwell time (ns)"), "plot axis should carry the unit:\n{script}");

    let (header, rows) = read_csv(&out_dir.join("delay_sweep.csv"));
    let (tau, eps, mean) =
        (column(&header, "eps_or_tau"), column(&header, "eps"), column(&header, "mse_mean"));
    assert_eq!(rows.len(), 2);
    let zero_row = rows.iter().find(|r| r[tau] == "0").expect("a dwell-time-zero row");
    assert_eq!(zero_row[eps], "0");
    assert_eq!(zero_row[mean], "0");
    let late_row = rows.iter().find(|r| r[tau] == "0.2").expect("a positive-dwell row");
    assert!(late_row[mean].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn independent_seeds_agree_within_error_bars() {
    let dir = tempfile::tempdir().unwrap();
    let mut estimates = Vec::new();
    for (seed, sub) in [(101, "a"), (202, "b")] {
        let cfg = write_mse_config(dir.path(), seed, 60, &[2], &[1], &[1], &[0.05]);
        run_ok(&[
            "mse-sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join(sub).to_str().unwrap(),
        ]);
        let (header, rows) = read_csv(&dir.path().join(sub).join("mse_sweep.csv"));
        let (mean, stderr) = (column(&header, "mse_mean"), column(&header, "mse_stderr"));
        estimates.push((
            rows[0][mean].parse::<f64>().unwrap(),
            rows[0][stderr].parse::<f64>().unwrap(),
        ));
    }
    let gap = (estimates[0].0 - estimates[1].0).abs();
    let band = 3.0 * (estimates[0].1.powi(2) + estimates[1].1.powi(2)).sqrt();
    assert!(
        gap <= band,
        "independent seeds disagree: {:?} vs {:?} (gap {gap:.3e} > band {band:.3e})",
        estimates[0],
        estimates[1]
    );
}

#[test]
fn hellinger_product_rows_match_their_closed_form_column() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "hellinger",
        "--channel",
        "loss",
        "--circuit",
        "product",
        "--samples",
        "4",
        "--seed",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let (header, rows) = read_csv(&out_dir.join("hellinger.csv"));
    assert_eq!(
        header,
        ["n", "l_err", "eps", "x", "h_mean", "h_stderr", "h_padded_mean", "h_closed", "samples"]
    );
    let (padded, closed) = (column(&header, "h_padded_mean"), column(&header, "h_closed"));
    assert!(!rows.is_empty());
    for row in &rows {
        let p: f64 = row[padded].parse().unwrap();
        let c: f64 = row[closed].parse().unwrap_or_else(|_| {
            panic!("product-circuit loss rows must carry a closed-form value: {row:?}")
        });
        assert!(
            (p - c).abs() < 1e-9,
            "vacuum-padded Hellinger distance should match its closed form: {row:?}"
        );
    }
}

#[test]
fn tables_command_reproduces_reference_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&["tables", "--samples", "40", "--seed", "3", "--out", out_dir.to_str().unwrap()]);

    let (header, rows) = read_csv(&out_dir.join("loss_marginal_moments.csv"));
    assert_eq!(header, ["n", "m", "mean", "stderr", "samples", "reference_value"]);
    assert_eq!(rows.len(), 5 * 5, "n in 2..=6 crossed with distillation orders 1..=5");
    let reference = column(&header, "reference_value");
    assert!(rows.iter().all(|r| !r[reference].is_empty()));

    let (_, sums) = read_csv(&out_dir.join("loss_sum_moments.csv"));
    assert_eq!(sums.len(), 5 * 5);

    let (corr_header, corr) = read_csv(&out_dir.join("pauli_error_overlap_correlators.csv"));
    assert_eq!(
        corr_header,
        ["quantity", "case", "n", "l_err", "mean", "stderr", "samples", "reference_value"]
    );
    assert_eq!(corr.len(), 7 * 3 * 4, "seven correlators per (n, l_err) cell");
}

#[test]
fn special_case_descends_to_the_uniform_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&["special-case", "--samples", "2", "--seed", "5", "--out", out_dir.to_str().unwrap()]);
    let (header, rows) = read_csv(&out_dir.join("spectrum_extremum.csv"));
    assert_eq!(
        header,
        ["d", "eps0", "m", "start", "iterations", "final_mse", "uniform_mse", "max_dev_from_uniform"]
    );
    assert_eq!(rows.len(), 9 * 2, "two starts for each (d, m) cell");
    let (final_mse, uniform_mse, dev) = (
        column(&header, "final_mse"),
        column(&header, "uniform_mse"),
        column(&header, "max_dev_from_uniform"),
    );
    for row in &rows {
        assert!(
            row[dev].parse::<f64>().unwrap() < 1e-5,
            "descent should land on the uniform spectrum: {row:?}"
        );
        let f: f64 = row[final_mse].parse().unwrap();
        let u: f64 = row[uniform_mse].parse().unwrap();
        assert!(f >= u - 1e-12, "no descent may undercut the uniform-spectrum value: {row:?}");
    }
}

#[test]
fn verify_exit_code_matches_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = vdist(&["verify", "--seed", "7", "--out", out_dir.to_str().unwrap()]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("verify_report.json")).unwrap())
            .unwrap();
    let criteria = report["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 12);
    let all_passed = report["all_passed"].as_bool().unwrap();
    assert_eq!(
        out.status.success(),
        all_passed,
        "exit code must mirror the report:\n{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert_eq!(
        all_passed,
        criteria.iter().all(|c| c["passed"].as_bool().unwrap()),
        "the summary flag must agree with the per-criterion flags"
    );
}
