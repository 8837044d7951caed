//! Command-line driver for the virtual-distillation noise-dilution
//! simulator: parameter sweeps, table regeneration, spectrum experiments,
//! and the self-verification suite.
//!
//! Every subcommand is deterministic: a master seed fans out into one
//! counter-based stream per (grid point, sample), so reruns — at any worker
//! count — produce byte-identical CSV files. The JSON sidecar written next
//! to each CSV records the exact configuration; only its timestamp varies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use vdist_cli::config::{ChannelConfig, CircuitFamily, ExperimentConfig};
use vdist_cli::output::{write_csv, write_gnuplot, write_sidecar};
use vdist_cli::{experiments, special, tables, verify};

#[derive(Parser)]
#[command(
    name = "vdist",
    version,
    about = "Virtual distillation under diluted loss and Pauli noise",
    long_about = "Simulates virtual distillation of noisy quantum states when a \
                  peripheral noise channel of total rate \u{3b5} is split into L \
                  layers of rate \u{3b5}/L interleaved with subcircuits, and checks \
                  the simulated mean squared errors against closed-form predictions."
)]
struct Cli {
    /// Worker threads (0 = all cores). Outputs are byte-identical for any
    /// value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Directory for CSV outputs and JSON sidecars.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Per-grid-point sample count override.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Use the full-scale grids instead of the quick defaults.
    #[arg(long, global = true)]
    extended: bool,
    #[command(subcommand)]
    command: Command,
}

/// Rate channels selectable without a config file.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum RateChannel {
    Loss,
    Depolarizing,
}

impl RateChannel {
    fn to_config(self) -> ChannelConfig {
        match self {
            RateChannel::Loss => ChannelConfig::Loss,
            RateChannel::Depolarizing => ChannelConfig::Depolarizing,
        }
    }
}

/// Decay channels selectable without a config file.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum DecayChannel {
    /// Loss rate from an exponential intensity decay over the dwell time.
    LossDecay,
    /// Depolarizing rate saturating exponentially over the dwell time.
    DepolDecay,
}

impl DecayChannel {
    fn to_config(self) -> ChannelConfig {
        match self {
            DecayChannel::LossDecay => ChannelConfig::LossDecay { gamma_db: 3.0 },
            DecayChannel::DepolDecay => ChannelConfig::DepolDecay { gamma: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CircuitArg {
    Haar,
    HardwareEfficient,
    Product,
}

impl CircuitArg {
    fn to_family(self) -> CircuitFamily {
        match self {
            CircuitArg::Haar => CircuitFamily::Haar,
            CircuitArg::HardwareEfficient => CircuitFamily::HardwareEfficient,
            CircuitArg::Product => CircuitFamily::Product,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the distilled MSE over (n, M, L_err, ε).
    MseSweep {
        /// JSON experiment configuration (overrides --channel).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RateChannel::Loss)]
        channel: RateChannel,
        /// Also emit a gnuplot script for the CSV.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Sweep the distilled MSE over dwell time τ for a decay channel.
    DelaySweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = DecayChannel::LossDecay)]
        channel: DecayChannel,
        #[arg(long)]
        gnuplot: bool,
    },
    /// Regenerate the circuit-averaged moment and correlator tables.
    Tables,
    /// Hellinger distance between the error spectrum and the uniform one.
    Hellinger {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RateChannel::Loss)]
        channel: RateChannel,
        #[arg(long, value_enum, default_value_t = CircuitArg::Product)]
        circuit: CircuitArg,
    },
    /// Descend the exactly solvable model's MSE to its extremal spectrum.
    SpecialCase,
    /// Run the full verification suite; exits nonzero on any failure.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Apply CLI overrides on top of a file or default configuration.
fn resolve_config(
    path: Option<&Path>,
    default: ExperimentConfig,
    seed: Option<u64>,
    samples: Option<usize>,
) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)
            .with_context(|| format!("loading config {}", p.display()))?,
        None => default,
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(k) = samples {
        cfg.samples = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// CSV file name for a sweep, from config or a per-command default.
fn csv_name(cfg: &ExperimentConfig, fallback: &str) -> String {
    cfg.output_path.clone().unwrap_or_else(|| fallback.to_string())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let start = Instant::now();
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating {}", cli.out.display()))?;

    match cli.command {
        Command::MseSweep { config, channel, gnuplot } => {
            let cfg = resolve_config(
                config.as_deref(),
                ExperimentConfig::default_mse(channel.to_config(), cli.extended),
                cli.seed,
                cli.samples,
            )?;
            let result = experiments::run_mse_sweep(&cfg)?;
            let name = csv_name(&cfg, "mse_sweep.csv");
            let csv_path = cli.out.join(&name);
            let (header, rows) = experiments::sweep_csv(&result.rows);
            write_csv(&csv_path, &header, &rows)?;
            let mut outputs = vec![csv_path.clone()];
            if gnuplot {
                let plot = cli.out.join(format!("{name}.gnuplot"));
                write_gnuplot(&plot, &name, "total error rate", 4, true)?;
                outputs.push(plot);
            }
            write_sidecar(
                &cli.out.join(format!("{name}.meta.json")),
                "mse-sweep",
                result.master_seed,
                serde_json::to_value(&cfg)?,
                &outputs,
                start.elapsed(),
            )?;
            println!("wrote {} rows to {}", result.rows.len(), csv_path.display());
        }
        Command::DelaySweep { config, channel, gnuplot } => {
            let cfg = resolve_config(
                config.as_deref(),
                ExperimentConfig::default_delay(channel.to_config(), cli.extended),
                cli.seed,
                cli.samples,
            )?;
            let result = experiments::run_delay_sweep(&cfg)?;
            let name = csv_name(&cfg, "delay_sweep.csv");
            let csv_path = cli.out.join(&name);
            let (header, rows) = experiments::sweep_csv(&result.rows);
            write_csv(&csv_path, &header, &rows)?;
            let mut outputs = vec![csv_path.clone()];
            if gnuplot {
                let plot = cli.out.join(format!("{name}.gnuplot"));
                let x_label = match &cfg.tau_unit {
                    Some(unit) => format!("dwell time ({unit})"),
                    None => "dwell time".to_string(),
                };
                write_gnuplot(&plot, &name, &x_label, 4, false)?;
                outputs.push(plot);
            }
            write_sidecar(
                &cli.out.join(format!("{name}.meta.json")),
                "delay-sweep",
                result.master_seed,
                serde_json::to_value(&cfg)?,
                &outputs,
                start.elapsed(),
            )?;
            println!("wrote {} rows to {}", result.rows.len(), csv_path.display());
        }
        Command::Tables => {
            let seed = cli.seed.unwrap_or(7);
            let samples = cli.samples.unwrap_or(10_000);
            let loss_n: &[usize] = &[2, 3, 4, 5, 6];
            let m_grid: &[u32] = &[1, 2, 3, 4, 5];
            let pauli_n: &[usize] = if cli.extended { &[2, 3, 4, 5, 6] } else { &[2, 3, 4] };
            let l_grid: &[usize] = &[1, 2, 3, 4];
            let (ptr, sums) = tables::loss_moment_tables(loss_n, m_grid, samples, seed)?;
            let correlators =
                tables::pauli_correlator_table(pauli_n, l_grid, samples, seed)?;
            let mut outputs = Vec::new();
            for (name, data) in [
                ("loss_marginal_moments.csv", tables::moment_csv(&ptr)),
                ("loss_sum_moments.csv", tables::moment_csv(&sums)),
                (
                    "pauli_error_overlap_correlators.csv",
                    tables::correlator_csv(&correlators),
                ),
            ] {
                let path = cli.out.join(name);
                write_csv(&path, &data.0, &data.1)?;
                println!("wrote {} rows to {}", data.1.len(), path.display());
                outputs.push(path);
            }
            write_sidecar(
                &cli.out.join("tables.meta.json"),
                "tables",
                seed,
                serde_json::json!({
                    "samples": samples,
                    "loss_n_grid": loss_n,
                    "m_grid": m_grid,
                    "pauli_n_grid": pauli_n,
                    "l_err_grid": l_grid,
                }),
                &outputs,
                start.elapsed(),
            )?;
        }
        Command::Hellinger { config, channel, circuit } => {
            let cfg = resolve_config(
                config.as_deref(),
                ExperimentConfig::default_hellinger(
                    channel.to_config(),
                    circuit.to_family(),
                    cli.extended,
                ),
                cli.seed,
                cli.samples,
            )?;
            let rows = experiments::run_hellinger(&cfg)?;
            let name = csv_name(&cfg, "hellinger.csv");
            let csv_path = cli.out.join(&name);
            let (header, body) = experiments::hellinger_csv(&rows);
            write_csv(&csv_path, &header, &body)?;
            write_sidecar(
                &cli.out.join(format!("{name}.meta.json")),
                "hellinger",
                cfg.master_seed,
                serde_json::to_value(&cfg)?,
                &[csv_path.clone()],
                start.elapsed(),
            )?;
            println!("wrote {} rows to {}", rows.len(), csv_path.display());
        }
        Command::SpecialCase => {
            let seed = cli.seed.unwrap_or(7);
            let starts = cli.samples.unwrap_or(20);
            let rows =
                special::run_extremum_search(
                &[3, 5, 8],
                &[1, 2, 3],
                0.1,
                starts,
                seed,
                special::DESCENT_GRAD_TOL,
            )?;
            let csv_path = cli.out.join("spectrum_extremum.csv");
            let (header, body) = special::extremum_csv(&rows);
            write_csv(&csv_path, &header, &body)?;
            write_sidecar(
                &cli.out.join("spectrum_extremum.csv.meta.json"),
                "special-case",
                seed,
                serde_json::json!({ "d_grid": [3, 5, 8], "m_grid": [1, 2, 3], "eps0": 0.1, "starts": starts }),
                &[csv_path.clone()],
                start.elapsed(),
            )?;
            let worst = rows.iter().map(|r| r.max_dev_from_uniform).fold(0.0f64, f64::max);
            println!(
                "wrote {} rows to {}; worst deviation from uniform {worst:.2e}",
                rows.len(),
                csv_path.display()
            );
        }
        Command::Verify => {
            let seed = cli.seed.unwrap_or(7);
            let tol = verify::Tolerances::default();
            let report = verify::run_all(seed, &tol, &cli.out)?;
            println!(
                "verification {}: {}/{} checks passed (report: {})",
                if report.all_passed { "PASSED" } else { "FAILED" },
                report.criteria.iter().filter(|c| c.passed).count(),
                report.criteria.len(),
                cli.out.join("verify_report.json").display()
            );
            if !report.all_passed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
