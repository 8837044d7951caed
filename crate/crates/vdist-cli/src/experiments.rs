//! Experiment drivers: per-sample simulation closures and the grid sweeps
//! that aggregate them into rows ready for CSV emission.

use anyhow::{bail, Context, Result};
use vdist_core::channel::eps_from_delay;
use vdist_core::distill::{distill, extract_error_component, mse};
use vdist_core::linalg::{hermitian_eig, tensor, UnitaryOp};
use vdist_core::pipeline::DilutionPlan;
use vdist_core::rng::RngStream;
use vdist_core::theory::{hellinger, hellinger_loss_product, hellinger_padded};
use vdist_core::unitary::{haar_unitary, hardware_efficient};

use crate::config::{ChannelConfig, CircuitFamily, ExperimentConfig};
use crate::runner::parallel_samples;
use crate::stats::summarize;

/// Eigenvalues below this magnitude are treated as exact zeros before any
/// √λ enters a Hellinger sum: eigensolver dust of order 1e−16 would
/// otherwise contribute √λ ≈ 1e−8 and swamp 1e−10 agreement checks.
pub const SPECTRUM_ZERO_THRESHOLD: f64 = 1e-12;

/// One aggregated grid point of an MSE sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub m: u32,
    pub l_err: usize,
    /// The swept abscissa: ε for rate sweeps, τ for delay sweeps.
    pub eps_or_tau: f64,
    /// The effective total error rate (equals `eps_or_tau` for rate sweeps).
    pub eps: f64,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub samples: usize,
    /// Mean unrenormalized trace of the noisy state (loss trace deficit;
    /// identically 1 for Pauli noise).
    pub trace_deficit_mean: f64,
}

/// An aggregated sweep plus the metadata needed to reproduce it.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<SweepRow>,
    pub master_seed: u64,
}

/// Draw the subcircuit set for one sample according to the circuit family.
pub fn draw_circuits(
    family: CircuitFamily,
    n: usize,
    l_err: usize,
    total_layers: usize,
    rng: &mut RngStream,
) -> Result<Vec<UnitaryOp>> {
    let dim = 1usize << n;
    let mut circuits = Vec::with_capacity(l_err);
    for _ in 0..l_err {
        let block = match family {
            CircuitFamily::Haar => haar_unitary(dim, rng)?,
            CircuitFamily::HardwareEfficient => {
                hardware_efficient(n, total_layers / l_err, rng)?
            }
            CircuitFamily::Product => {
                let mut mat = haar_unitary(2, rng)?.mat().clone();
                for _ in 1..n {
                    mat = tensor(&mat, haar_unitary(2, rng)?.mat());
                }
                UnitaryOp::new(mat)?
            }
        };
        circuits.push(block);
    }
    Ok(circuits)
}

/// Simulate one sample: draw circuits, run the diluted-noise pipeline,
/// distill at order `m`, and return (MSE, unrenormalized trace).
///
/// At ε = 0 the noisy state equals the pure target and distillation fixes
/// pure states, so the MSE is evaluated as the algebraic identity 0 rather
/// than through floating-point simulation.
pub fn mse_sample(
    channel: &ChannelConfig,
    family: CircuitFamily,
    n: usize,
    m: u32,
    l_err: usize,
    total_layers: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if eps == 0.0 {
        return Ok((0.0, 1.0));
    }
    let circuits = draw_circuits(family, n, l_err, total_layers, rng)?;
    let plan = DilutionPlan::new(channel.noise_at(eps)?, circuits)?;
    let out = plan.run()?;
    let distilled = distill(&out.noisy, m)?;
    let err = mse(&out.target, &distilled.state)?;
    Ok((err, out.trace_before_renorm))
}

fn sweep_over(
    cfg: &ExperimentConfig,
    abscissa: &[f64],
    eps_of: impl Fn(f64) -> Result<f64>,
) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    let mut point = 0usize;
    for &n in &cfg.n_grid {
        for &m in &cfg.m_grid {
            for &l_err in &cfg.l_err_grid {
                for &x in abscissa {
                    let eps = eps_of(x)?;
                    let samples = parallel_samples(cfg.master_seed, point, cfg.samples, |rng| {
                        mse_sample(
                            &cfg.channel,
                            cfg.circuit,
                            n,
                            m,
                            l_err,
                            cfg.total_layers,
                            eps,
                            rng,
                        )
                    })
                    .with_context(|| {
                        format!("grid point n={n} M={m} L_err={l_err} rate/delay={x}")
                    })?;
                    let mses: Vec<f64> = samples.iter().map(|s| s.0).collect();
                    let deficits: Vec<f64> = samples.iter().map(|s| s.1).collect();
                    let s = summarize(&mses);
                    rows.push(SweepRow {
                        n,
                        m,
                        l_err,
                        eps_or_tau: x,
                        eps,
                        mse_mean: s.mean,
                        mse_stderr: s.stderr,
                        samples: s.count,
                        trace_deficit_mean: summarize(&deficits).mean,
                    });
                    point += 1;
                }
            }
        }
    }
    Ok(ExperimentResult { rows, master_seed: cfg.master_seed })
}

/// Monte Carlo MSE over the configured (n, M, L_err, ε) grid.
pub fn run_mse_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.channel.is_decay() {
        bail!("mse-sweep takes a rate channel; use delay-sweep for decay models");
    }
    sweep_over(cfg, &cfg.eps_grid, Ok)
}

/// Monte Carlo MSE against total delay τ: each τ is converted to a rate
/// through the configured decay model, then swept like an ordinary grid.
pub fn run_delay_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let model = match cfg.channel.decay_model() {
        Some(m) => m,
        None => bail!("delay-sweep requires a decay channel (loss_decay or depol_decay)"),
    };
    if cfg.circuit != CircuitFamily::HardwareEfficient {
        bail!("delay-sweep models the hardware-efficient scenario; set circuit accordingly");
    }
    sweep_over(cfg, &cfg.tau_grid, |tau| Ok(eps_from_delay(model, tau)?))
}

/// One aggregated grid point of a Hellinger sweep.
#[derive(Debug, Clone)]
pub struct HellingerRow {
    pub n: usize,
    pub l_err: usize,
    pub eps: f64,
    /// Per-layer rate x = ε/L_err actually applied by each noise layer.
    pub x: f64,
    /// Mean Hellinger distance between the error spectrum and uniform.
    pub h_mean: f64,
    pub h_stderr: f64,
    /// Mean of the padded-convention distance √(H² + 1/(2d)).
    pub h_padded_mean: f64,
    /// Closed-form prediction (product circuits under loss only).
    pub h_closed: Option<f64>,
    pub samples: usize,
}

/// Hellinger distance of one sample's extracted error component.
pub fn hellinger_sample(
    channel: &ChannelConfig,
    family: CircuitFamily,
    n: usize,
    l_err: usize,
    total_layers: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let spectrum = error_spectrum(channel, family, n, l_err, total_layers, eps, rng)?;
    let d = spectrum.len();
    Ok((hellinger(&spectrum, d)?, hellinger_padded(&spectrum, d)?))
}

/// Full eigenvalue spectrum (descending, length = space dimension) of the
/// normalized error component of one pipeline draw, with sub-threshold dust
/// snapped to exact zeros.
pub fn error_spectrum(
    channel: &ChannelConfig,
    family: CircuitFamily,
    n: usize,
    l_err: usize,
    total_layers: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let circuits = draw_circuits(family, n, l_err, total_layers, rng)?;
    let noise = channel.noise_at(eps)?;
    let plan = DilutionPlan::new(noise.clone(), circuits)?;
    let out = plan.run()?;
    let err = extract_error_component(&out, &noise)?;
    let (evals, _) = hermitian_eig(err.mat())?;
    let mut cleaned: Vec<f64> = evals
        .iter()
        .map(|&l| if l.abs() < SPECTRUM_ZERO_THRESHOLD { 0.0 } else { l })
        .collect();
    cleaned.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(cleaned)
}

/// Hellinger sweep over the configured grid. Requires ε > 0 everywhere: a
/// noiseless run has no error component to compare against uniform.
pub fn run_hellinger(cfg: &ExperimentConfig) -> Result<Vec<HellingerRow>> {
    cfg.validate()?;
    if cfg.channel.is_decay() {
        bail!("hellinger sweeps take a rate channel");
    }
    if cfg.eps_grid.iter().any(|&e| e == 0.0) {
        bail!("hellinger sweeps require strictly positive error rates");
    }
    let product_loss =
        cfg.channel.is_loss() && cfg.circuit == CircuitFamily::Product;
    let mut rows = Vec::new();
    let mut point = 0usize;
    for &n in &cfg.n_grid {
        for &l_err in &cfg.l_err_grid {
            for &eps in &cfg.eps_grid {
                let samples = parallel_samples(cfg.master_seed, point, cfg.samples, |rng| {
                    hellinger_sample(
                        &cfg.channel,
                        cfg.circuit,
                        n,
                        l_err,
                        cfg.total_layers,
                        eps,
                        rng,
                    )
                })
                .with_context(|| format!("grid point n={n} L_err={l_err} eps={eps}"))?;
                let plain: Vec<f64> = samples.iter().map(|s| s.0).collect();
                let padded: Vec<f64> = samples.iter().map(|s| s.1).collect();
                let s = summarize(&plain);
                let x = eps / l_err as f64;
                rows.push(HellingerRow {
                    n,
                    l_err,
                    eps,
                    x,
                    h_mean: s.mean,
                    h_stderr: s.stderr,
                    h_padded_mean: summarize(&padded).mean,
                    h_closed: if product_loss {
                        Some(hellinger_loss_product(n, x)?)
                    } else {
                        None
                    },
                    samples: s.count,
                });
                point += 1;
            }
        }
    }
    Ok(rows)
}

/// CSV header and rows for an MSE/delay sweep.
pub fn sweep_csv(rows: &[SweepRow]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec![
        "n",
        "m",
        "l_err",
        "eps_or_tau",
        "eps",
        "mse_mean",
        "mse_stderr",
        "samples",
        "trace_deficit_mean",
    ];
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                r.l_err.to_string(),
                crate::output::fmt_f64(r.eps_or_tau),
                crate::output::fmt_f64(r.eps),
                crate::output::fmt_f64(r.mse_mean),
                crate::output::fmt_f64(r.mse_stderr),
                r.samples.to_string(),
                crate::output::fmt_f64(r.trace_deficit_mean),
            ]
        })
        .collect();
    (header, body)
}

/// CSV header and rows for a Hellinger sweep.
pub fn hellinger_csv(rows: &[HellingerRow]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec![
        "n",
        "l_err",
        "eps",
        "x",
        "h_mean",
        "h_stderr",
        "h_padded_mean",
        "h_closed",
        "samples",
    ];
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.l_err.to_string(),
                crate::output::fmt_f64(r.eps),
                crate::output::fmt_f64(r.x),
                crate::output::fmt_f64(r.h_mean),
                crate::output::fmt_f64(r.h_stderr),
                crate::output::fmt_f64(r.h_padded_mean),
                r.h_closed.map(crate::output::fmt_f64).unwrap_or_default(),
                r.samples.to_string(),
            ]
        })
        .collect();
    (header, body)
}
