//! Experiment configuration: a single strict JSON document. Unknown keys are
//! rejected so typos surface instead of silently changing an experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anpa::PaMethod;
use crate::dnn::{Arch, TrainConfig};
use crate::error::{Error, Result};
use crate::smcore::SystemConfig;
use crate::tas::TasMethod;

fn default_workers() -> usize {
    1
}

fn default_mc_samples() -> usize {
    400
}

fn default_hidden() -> Vec<usize> {
    vec![128, 128, 128, 128]
}

/// A detector entry in a BER sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorSpec {
    Ml,
    Zf,
    Mmse,
    Dnn { path: PathBuf },
}

impl DetectorSpec {
    /// Method tag used in result rows.
    pub fn method_name(&self) -> String {
        match self {
            DetectorSpec::Ml => "ml".into(),
            DetectorSpec::Zf => "zf".into(),
            DetectorSpec::Mmse => "mmse".into(),
            DetectorSpec::Dnn { path } => format!(
                "dnn:{}",
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "model".into())
            ),
        }
    }
}

/// A power-allocation strategy entry in a PA sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaMethodSpec {
    Fixed { beta: f64 },
    Exhaustive { grid_step: f64 },
    Gradient { beta0: f64, step0: f64, iters: usize },
    MaxPSinrAnsnr,
}

impl PaMethodSpec {
    pub fn method_name(&self) -> String {
        match self {
            PaMethodSpec::Fixed { beta } => format!("fixed({beta})"),
            PaMethodSpec::Exhaustive { grid_step } => format!("es({grid_step})"),
            PaMethodSpec::Gradient { .. } => "gd".into(),
            PaMethodSpec::MaxPSinrAnsnr => "max-p-sinr-ansnr".into(),
        }
    }

    pub fn tag(&self) -> PaMethod {
        match self {
            PaMethodSpec::Fixed { .. } => PaMethod::Fixed,
            PaMethodSpec::Exhaustive { .. } => PaMethod::Exhaustive,
            PaMethodSpec::Gradient { .. } => PaMethod::Gradient,
            PaMethodSpec::MaxPSinrAnsnr => PaMethod::MaxPSinrAnsnr,
        }
    }
}

/// Loss selection for DNN training runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    DeepSupervisionCe,
    ReconstructionMse,
}

/// DNN training and evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnSection {
    pub arch: Arch,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Training samples to generate.
    pub n_samples: usize,
    /// Validation samples to generate (disjoint stream).
    pub val_samples: usize,
    /// SNR grid for dataset generation; defaults to the sweep grid.
    #[serde(default)]
    pub train_snr_grid_db: Option<Vec<f64>>,
    /// Checkpoint to load for `eval-dnn`.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub loss: LossKind,
}

/// Top-level experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// SNR points in dB, strictly ascending.
    pub snr_grid_db: Vec<f64>,
    /// Trials (BER) or channel realizations (SR) per SNR point.
    pub trials: u64,
    /// Early stop once every compared method has at least this many errors.
    #[serde(default)]
    pub target_errors: Option<u64>,
    /// Noise draws per mutual-information estimate.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Selection method for single-method sweeps (defaults to the first
    /// `n_t` antennas).
    #[serde(default)]
    pub tas_method: Option<TasMethod>,
    /// Selection methods compared by `sweep-tas`.
    #[serde(default)]
    pub tas_methods: Option<Vec<TasMethod>>,
    /// PA strategies compared by `sweep-pa`.
    #[serde(default)]
    pub pa_methods: Option<Vec<PaMethodSpec>>,
    /// Detectors compared by `simulate-ber`.
    #[serde(default)]
    pub detectors: Option<Vec<DetectorSpec>>,
    #[serde(default)]
    pub dnn: Option<DnnSection>,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("snr_grid_db must be nonempty".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("snr_grid_db must be strictly ascending".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.workers < 1 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.mc_samples < 1 {
            return Err(Error::Config("mc_samples must be >= 1".into()));
        }
        if let Some(pa) = &self.pa_methods {
            for spec in pa {
                match spec {
                    PaMethodSpec::Fixed { beta } if !(0.0..=1.0).contains(beta) => {
                        return Err(Error::Config(format!("fixed beta {beta} out of [0,1]")));
                    }
                    PaMethodSpec::Exhaustive { grid_step }
                        if !(0.0 < *grid_step && *grid_step <= 0.5) =>
                    {
                        return Err(Error::Config(format!(
                            "grid_step {grid_step} out of (0, 0.5]"
                        )));
                    }
                    PaMethodSpec::Gradient { beta0, .. } if !(0.0 < *beta0 && *beta0 < 1.0) => {
                        return Err(Error::Config(format!("beta0 {beta0} out of (0,1)")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
