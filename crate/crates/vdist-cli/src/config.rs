//! Experiment configuration: JSON-loadable sweep definitions with strict
//! validation, plus the built-in default grids each subcommand falls back
//! to when no config file is given.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vdist_core::channel::{DecayModel, NoiseSpec};

/// Which noise channel a sweep applies, and how sweep rates map onto it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    /// i.i.d. loss at rate ε from the sweep grid.
    Loss,
    /// Depolarizing Pauli noise: ε_a = ε/3 for each axis.
    Depolarizing,
    /// General Pauli noise: ε_a = ε·w_a/Σw with fixed axis weights.
    Pauli { weights: [f64; 3] },
    /// Loss accumulated over a delay τ: ε = 1 − 10^(−γτ/10).
    LossDecay { gamma_db: f64 },
    /// Depolarization accumulated over a delay τ: ε = 1 − e^(−γτ).
    DepolDecay { gamma: f64 },
}

impl ChannelConfig {
    pub fn is_decay(&self) -> bool {
        matches!(self, Self::LossDecay { .. } | Self::DepolDecay { .. })
    }

    /// Whether the underlying channel is the loss channel (vacuum-extended
    /// space) as opposed to Pauli noise.
    pub fn is_loss(&self) -> bool {
        matches!(self, Self::Loss | Self::LossDecay { .. })
    }

    pub fn decay_model(&self) -> Option<DecayModel> {
        match *self {
            Self::LossDecay { gamma_db } => Some(DecayModel::LossDecay { gamma_db }),
            Self::DepolDecay { gamma } => Some(DecayModel::DepolDecay { gamma }),
            _ => None,
        }
    }

    /// Build the channel at total rate `eps`.
    pub fn noise_at(&self, eps: f64) -> Result<NoiseSpec> {
        let spec = match self {
            Self::Loss | Self::LossDecay { .. } => NoiseSpec::loss(eps)?,
            Self::Depolarizing | Self::DepolDecay { .. } => NoiseSpec::depolarizing(eps)?,
            Self::Pauli { weights } => {
                let total: f64 = weights.iter().sum();
                NoiseSpec::pauli(
                    eps * weights[0] / total,
                    eps * weights[1] / total,
                    eps * weights[2] / total,
                )?
            }
        };
        Ok(spec)
    }

    /// Short channel label used in CSV rows.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Loss | Self::LossDecay { .. } => "loss",
            Self::Depolarizing | Self::DepolDecay { .. } => "depolarizing",
            Self::Pauli { .. } => "pauli",
        }
    }
}

/// Circuit ensemble the sweep averages over.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CircuitFamily {
    /// Independent Haar-random subcircuits.
    Haar,
    /// Hardware-efficient ansatz blocks with uniformly random angles; the
    /// fixed `total_layers` budget is split evenly across the L_err blocks.
    HardwareEfficient,
    /// Tensor products of independent single-qubit Haar unitaries.
    Product,
}

/// A full sweep definition: channel, grids, circuit family, sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub n_grid: Vec<usize>,
    pub m_grid: Vec<u32>,
    pub l_err_grid: Vec<usize>,
    /// Total error rates to sweep (non-decay channels).
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    /// Delay times to sweep (decay channels).
    #[serde(default)]
    pub tau_grid: Vec<f64>,
    /// Unit label for the delay axis (e.g. "ns"). Purely descriptive: it is
    /// echoed into the metadata sidecar and plot labels, never into the
    /// γτ products themselves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_unit: Option<String>,
    pub circuit: CircuitFamily,
    /// Ansatz depth budget for hardware-efficient circuits; each of the
    /// L_err blocks gets total_layers/L_err layers.
    #[serde(default = "default_total_layers")]
    pub total_layers: usize,
    pub samples: usize,
    pub master_seed: u64,
    /// Output stem for the CSV and metadata files (under the --out dir).
    #[serde(default)]
    pub output_path: Option<String>,
}

fn default_total_layers() -> usize {
    8
}

impl ExperimentConfig {
    /// Load and validate a JSON config file. Unknown fields are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.m_grid.is_empty() || self.l_err_grid.is_empty() {
            bail!("n_grid, m_grid, and l_err_grid must all be non-empty");
        }
        if self.samples == 0 {
            bail!("samples must be at least 1");
        }
        if self.channel.is_decay() {
            if self.tau_grid.is_empty() {
                bail!("decay channels require a non-empty tau_grid");
            }
            if !self.eps_grid.is_empty() {
                bail!("decay channels take tau_grid, not eps_grid");
            }
            for &tau in &self.tau_grid {
                if tau < 0.0 || !tau.is_finite() {
                    bail!("delay {tau} is not a finite non-negative number");
                }
            }
        } else {
            if self.eps_grid.is_empty() {
                bail!("rate channels require a non-empty eps_grid");
            }
            if !self.tau_grid.is_empty() {
                bail!("rate channels take eps_grid, not tau_grid");
            }
            for &eps in &self.eps_grid {
                if !(0.0..1.0).contains(&eps) {
                    bail!("error rate {eps} is outside [0, 1)");
                }
            }
        }
        if self.tau_unit.is_some() && !self.channel.is_decay() {
            bail!("tau_unit only applies to decay channels");
        }
        if let ChannelConfig::Pauli { weights } = &self.channel {
            if weights.iter().any(|w| *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                bail!("Pauli axis weights must be non-negative with positive sum");
            }
        }
        for &n in &self.n_grid {
            if n == 0 {
                bail!("qubit counts must be at least 1");
            }
        }
        for &m in &self.m_grid {
            if m == 0 {
                bail!("distillation orders must be at least 1");
            }
        }
        if self.circuit == CircuitFamily::HardwareEfficient {
            for &l in &self.l_err_grid {
                if l == 0 || self.total_layers % l != 0 {
                    bail!(
                        "total_layers {} must split evenly across {} noise layers",
                        self.total_layers,
                        l
                    );
                }
            }
        } else {
            for &l in &self.l_err_grid {
                if l == 0 {
                    bail!("noise layer counts must be at least 1");
                }
            }
        }
        Ok(())
    }

    /// Default MSE sweep: Haar circuits, ε = 0.02, the standard small grid
    /// (loss dims stay at or below 3⁴; `extended` raises the loss grid to
    /// n = 6, dimension 3⁶ = 729).
    pub fn default_mse(channel: ChannelConfig, extended: bool) -> Self {
        let n_grid = if extended {
            vec![2, 3, 4, 5, 6]
        } else if channel.is_loss() {
            vec![2, 3, 4]
        } else {
            vec![2, 3, 4]
        };
        Self {
            channel,
            n_grid,
            m_grid: vec![1, 2],
            l_err_grid: vec![1, 2, 4],
            eps_grid: vec![0.02],
            tau_grid: vec![],
            tau_unit: None,
            circuit: CircuitFamily::Haar,
            total_layers: default_total_layers(),
            samples: if extended { 400 } else { 100 },
            master_seed: 7,
            output_path: None,
        }
    }

    /// Default delay sweep: the four-qubit hardware-efficient scenario with
    /// eight total ansatz layers and an evenly spaced τ grid.
    pub fn default_delay(channel: ChannelConfig, extended: bool) -> Self {
        let points = if extended { 13 } else { 7 };
        let tau_grid: Vec<f64> = (0..points).map(|i| i as f64 * 0.05).collect();
        Self {
            channel,
            n_grid: vec![4],
            m_grid: vec![1, 2, 3],
            l_err_grid: vec![1, 2, 4],
            eps_grid: vec![],
            tau_grid,
            tau_unit: None,
            circuit: CircuitFamily::HardwareEfficient,
            total_layers: 8,
            samples: if extended { 200 } else { 60 },
            master_seed: 7,
            output_path: None,
        }
    }

    /// Default Hellinger run for the given mode: `Product` circuits give the
    /// closed-form comparison, `Haar` the general-circuit trends.
    pub fn default_hellinger(channel: ChannelConfig, circuit: CircuitFamily, extended: bool) -> Self {
        let n_grid = if extended && !channel.is_loss() {
            vec![1, 2, 3, 4, 5, 6]
        } else {
            vec![1, 2, 3, 4]
        };
        Self {
            channel,
            n_grid,
            m_grid: vec![1],
            l_err_grid: vec![1, 2, 4],
            eps_grid: vec![0.02],
            tau_grid: vec![],
            tau_unit: None,
            circuit,
            total_layers: default_total_layers(),
            samples: if extended { 100 } else { 40 },
            master_seed: 7,
            output_path: None,
        }
    }
}
